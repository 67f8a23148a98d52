#pragma once

#include <stdexcept>
#include <string>

namespace detos {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or incompatible kernel configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A scripted execution no longer matches its recorded decisions or trace.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class TaskError : public Error {
 public:
  using Error::Error;
};

class MalformedRequest : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  enum class Kind { truncated, corrupt, version };
  TraceError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace detos

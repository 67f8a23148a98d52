#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "detos/codec.hpp"

namespace detos {

// How indeterminate inputs absent from the store are produced.
enum class InputPolicy {
  strict,     // absence is an error
  zero_fill,  // zero bytes
  enumerate,  // each byte is a choice over a small alphabet
};

// Named input blobs supplied with an execution.
class InputStore {
 public:
  void set(std::string label, Bytes data) { blobs_[std::move(label)] = std::move(data); }
  bool contains(const std::string& label) const { return blobs_.count(label) != 0; }
  // Throws InputError for an absent label.
  const Bytes& at(const std::string& label) const;
  const std::map<std::string, Bytes>& blobs() const noexcept { return blobs_; }

 private:
  std::map<std::string, Bytes> blobs_;
};

/// Per-execution view of the input store. Bytes handed out for a label are
/// cached, so the same label and offset read the same value for the rest of
/// the execution.
class IndeterminateInputs {
 public:
  using Chooser = std::function<std::uint32_t(std::uint32_t arity)>;

  IndeterminateInputs(const InputStore& store, InputPolicy policy, Bytes alphabet);

  // Returns exactly `length` bytes. Throws InputError when the policy cannot
  // supply them.
  Bytes get(const std::string& label, std::size_t length, const Chooser& choose);

 private:
  const InputStore& store_;
  InputPolicy policy_;
  Bytes alphabet_;
  std::map<std::string, Bytes> produced_;
};

}  // namespace detos

#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "detos/syscall.hpp"

namespace detos {

class Kernel;

/// A kernel component implementing some subset of the syscall list. Handlers
/// run on the calling task; they may block it through the scheduler.
class Component {
 public:
  virtual ~Component() = default;
  virtual std::string name() const = 0;
  virtual bool implements(Sys s) const = 0;
  virtual SyscallResult handle(const SyscallRequest& req) = 0;
};

/// Ordered components, top first. A syscall resolves to the topmost
/// component implementing it; the stub at the bottom implements everything.
class ComponentStack {
 public:
  // Appends below every component added so far.
  void push_bottom(std::unique_ptr<Component> c);
  // Fixes the resolution table. Throws ConfigError unless the last
  // component implements every syscall.
  void seal();

  Component& resolve(Sys s) const { return *components_[table_[static_cast<std::size_t>(s)]]; }
  // Topmost component strictly below `from` implementing `s`.
  Component& resolve_below(const Component& from, Sys s) const;

  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return components_.size(); }
  Component& at(std::size_t i) const { return *components_.at(i); }

 private:
  std::vector<std::unique_ptr<Component>> components_;
  std::array<std::size_t, kSyscallCount> table_{};
  bool sealed_ = false;
};

}  // namespace detos

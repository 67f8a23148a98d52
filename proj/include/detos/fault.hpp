#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace detos {

enum class FaultKind {
  assertion,
  deadlock,
  unsupported_syscall,
  allocation_failure_unhandled,
  vfs_violation,
  replay_divergence,
};

inline constexpr std::array<FaultKind, 6> kAllFaultKinds{
    FaultKind::assertion,     FaultKind::deadlock,          FaultKind::unsupported_syscall,
    FaultKind::allocation_failure_unhandled, FaultKind::vfs_violation, FaultKind::replay_divergence};

std::string_view fault_name(FaultKind k);
std::optional<FaultKind> fault_from_name(std::string_view name);

enum class FaultAction { report, ignore };

// Which faults end an execution with a verdict. Everything reports by default.
class FaultPolicy {
 public:
  void set(FaultKind kind, FaultAction action) { actions_[static_cast<std::size_t>(kind)] = action; }
  FaultAction action(FaultKind kind) const { return actions_[static_cast<std::size_t>(kind)]; }

  // replay-divergence can never be ignored.
  bool valid() const { return action(FaultKind::replay_divergence) == FaultAction::report; }

 private:
  std::array<FaultAction, kAllFaultKinds.size()> actions_{};
};

}  // namespace detos

#include "detos/event_log.hpp"

#include <cstdio>

#include "detos/codec.hpp"
#include "detos/fault.hpp"

namespace detos {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::syscall_enter: return "syscall-enter";
    case EventKind::syscall_exit: return "syscall-exit";
    case EventKind::choice: return "choice";
    case EventKind::task_switch: return "task-switch";
    case EventKind::fault: return "fault";
    case EventKind::exit: return "exit";
  }
  return "?";
}

void EventLog::append(TaskId task, EventKind kind, std::string name, std::uint64_t digest) {
  events_.push_back({events_.size() + 1, task, kind, std::move(name), digest});
}

std::size_t EventLog::count(EventKind kind) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.kind == kind;
  return n;
}

std::string EventLog::to_text() const {
  std::string out;
  char hex[17];
  for (const auto& e : events_) {
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(e.digest));
    out += std::to_string(e.seq);
    out += ' ';
    out += std::to_string(e.task);
    out += ' ';
    out += event_kind_name(e.kind);
    out += ' ';
    out += e.name;
    out += ' ';
    out += hex;
    out += '\n';
  }
  return out;
}

std::uint64_t EventLog::digest() const { return digest_of(to_text()); }

std::string_view fault_name(FaultKind k) {
  switch (k) {
    case FaultKind::assertion: return "assertion";
    case FaultKind::deadlock: return "deadlock";
    case FaultKind::unsupported_syscall: return "unsupported-syscall";
    case FaultKind::allocation_failure_unhandled: return "allocation-failure-unhandled";
    case FaultKind::vfs_violation: return "vfs-violation";
    case FaultKind::replay_divergence: return "replay-divergence";
  }
  return "?";
}

std::optional<FaultKind> fault_from_name(std::string_view name) {
  for (auto k : kAllFaultKinds)
    if (fault_name(k) == name) return k;
  return std::nullopt;
}

}  // namespace detos

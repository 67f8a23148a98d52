#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "detos/task.hpp"

namespace detos {

enum class EventKind { syscall_enter, syscall_exit, choice, task_switch, fault, exit };

std::string_view event_kind_name(EventKind k);

struct Event {
  std::uint64_t seq = 0;
  TaskId task = kKernelContext;
  EventKind kind = EventKind::exit;
  std::string name;
  std::uint64_t digest = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Ordered observable events of one execution. Byte-equality of `to_text()`
/// is what "identical execution" means. Append-only.
///
/// Text form, one event per line: `seq task kind name digest` with the
/// digest as 16 hex digits.
class EventLog {
 public:
  void append(TaskId task, EventKind kind, std::string name, std::uint64_t digest);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  const Event& back() const { return events_.back(); }
  std::size_t count(EventKind kind) const;

  std::string to_text() const;
  std::uint64_t digest() const;

  friend bool operator==(const EventLog&, const EventLog&) = default;

 private:
  std::vector<Event> events_;
};

}  // namespace detos

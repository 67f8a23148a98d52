#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "detos/component.hpp"
#include "detos/config.hpp"
#include "detos/task.hpp"

namespace detos {

/// Task scheduling on top of the task runtime.
///
///  - null:   a single task, no switching.
///  - sync:   round-robin in registration order; never consumes choices.
///  - async:  every interrupt point chooses among the runnable tasks.
///  - fair:   as async, but a task passed over `fair_bound` consecutive
///            decisions is forced (the choice only ranges over forced tasks).
///
/// Runnable tasks are ordered by id, so a choice index names a fixed task.
/// Decisions with a single candidate consume no choice.
class Scheduler : public Component {
 public:
  Scheduler(Kernel& kernel, SchedulerKind kind, std::uint32_t fair_bound);

  std::string name() const override;
  bool implements(Sys s) const override;
  SyscallResult handle(const SyscallRequest& req) override;

  SchedulerKind kind() const noexcept { return kind_; }

  void register_main(TaskId main);
  // New runnable task; no implicit switch. Throws TaskError under the null
  // scheduler or when the task cap is hit.
  TaskId spawn(std::function<void()> entry);

  void interrupt_point();

  // Blocks the calling task on `channel` until woken and rescheduled.
  void block(std::string channel);
  // Waking a runnable or finished task is a no-op.
  void wake(TaskId id);
  void wake_all(std::string_view channel);

  // True iff some task is blocked and none is runnable; raises `deadlock`.
  bool detect_deadlock();

  // Finish hook for the task runtime: picks where control goes next.
  TaskId on_finished(TaskId finished);

  std::vector<TaskId> runnable() const;
  std::vector<TaskId> blocked() const;
  std::uint32_t deficit(TaskId id) const;
  // Switches performed so far, for tests of the fairness window.
  std::uint64_t decisions() const noexcept { return decisions_; }

 private:
  struct Entry {
    std::string channel;
    std::uint32_t deficit = 0;
  };

  TaskId pick(TaskId from, const std::vector<TaskId>& candidates);
  TaskId next_in_round(TaskId from, const std::vector<TaskId>& candidates) const;
  void reschedule_away(TaskId from);
  void transfer(TaskId from, TaskId to);

  Kernel& kernel_;
  SchedulerKind kind_;
  std::uint32_t fair_bound_;
  std::map<TaskId, Entry> table_;
  TaskId main_ = kKernelContext;
  std::uint64_t decisions_ = 0;
};

}  // namespace detos

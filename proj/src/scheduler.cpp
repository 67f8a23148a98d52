#include "detos/scheduler.hpp"

#include <algorithm>
#include <cerrno>

#include "detos/error.hpp"
#include "detos/kernel.hpp"

namespace detos {

Scheduler::Scheduler(Kernel& kernel, SchedulerKind kind, std::uint32_t fair_bound)
    : kernel_(kernel), kind_(kind), fair_bound_(fair_bound) {}

std::string Scheduler::name() const { return "scheduler(" + std::string(scheduler_name(kind_)) + ")"; }

bool Scheduler::implements(Sys s) const {
  switch (s) {
    case Sys::thread_create:
    case Sys::sched_yield:
    case Sys::gettid:
    case Sys::getpid:
    case Sys::exit:
      return true;
    default:
      return false;
  }
}

SyscallResult Scheduler::handle(const SyscallRequest& req) {
  switch (req.name) {
    case Sys::thread_create: {
      auto slot = std::get<std::int64_t>(req.args[0]);
      auto& pending = kernel_.guest().pending_entries;
      auto it = pending.find(slot);
      if (it == pending.end()) return SyscallResult::fail(EINVAL);
      auto entry = std::move(it->second);
      pending.erase(it);
      if (kind_ == SchedulerKind::null) return SyscallResult::fail(ENOTSUP);
      try {
        return SyscallResult::ok(spawn(std::move(entry)));
      } catch (const TaskError&) {
        return SyscallResult::fail(EAGAIN);
      }
    }
    case Sys::sched_yield:
      interrupt_point();
      return SyscallResult::ok(0);
    case Sys::gettid:
      return SyscallResult::ok(kernel_.current_task());
    case Sys::getpid:
      return SyscallResult::ok(1);
    case Sys::exit:
      kernel_.exit(static_cast<int>(std::get<std::int64_t>(req.args[0])));
    default:
      return SyscallResult::fail(ENOSYS);
  }
}

void Scheduler::register_main(TaskId main) {
  main_ = main;
  table_[main];
}

TaskId Scheduler::spawn(std::function<void()> entry) {
  if (kind_ == SchedulerKind::null) throw TaskError("the null scheduler admits a single task");
  TaskId id = kernel_.runtime().create(std::move(entry));
  table_[id];
  return id;
}

std::vector<TaskId> Scheduler::runnable() const {
  std::vector<TaskId> out;
  for (const auto& [id, e] : table_)
    if (kernel_.runtime().state(id) == TaskState::runnable) out.push_back(id);
  return out;
}

std::vector<TaskId> Scheduler::blocked() const {
  std::vector<TaskId> out;
  for (const auto& [id, e] : table_)
    if (kernel_.runtime().state(id) == TaskState::blocked) out.push_back(id);
  return out;
}

std::uint32_t Scheduler::deficit(TaskId id) const {
  auto it = table_.find(id);
  return it == table_.end() ? 0 : it->second.deficit;
}

TaskId Scheduler::next_in_round(TaskId from, const std::vector<TaskId>& candidates) const {
  auto it = std::upper_bound(candidates.begin(), candidates.end(), from);
  return it == candidates.end() ? candidates.front() : *it;
}

TaskId Scheduler::pick(TaskId from, const std::vector<TaskId>& candidates) {
  switch (kind_) {
    case SchedulerKind::null:
      return candidates.front();
    case SchedulerKind::sync:
      return next_in_round(from, candidates);
    case SchedulerKind::async_safety:
      if (candidates.size() == 1) return candidates.front();
      return candidates[kernel_.choose(static_cast<std::uint32_t>(candidates.size()), "sched")];
    case SchedulerKind::async_fair: {
      std::vector<TaskId> forced;
      for (auto t : candidates)
        if (table_[t].deficit >= fair_bound_) forced.push_back(t);
      const auto& pool = forced.empty() ? candidates : forced;
      TaskId chosen =
          pool.size() == 1 ? pool.front() : pool[kernel_.choose(static_cast<std::uint32_t>(pool.size()), "sched")];
      for (auto t : candidates) {
        if (t == chosen) table_[t].deficit = 0;
        else ++table_[t].deficit;
      }
      return chosen;
    }
  }
  return candidates.front();
}

void Scheduler::transfer(TaskId from, TaskId to) {
  ++decisions_;
  if (to == from) return;
  ByteWriter w;
  w.u32(to);
  kernel_.log(EventKind::task_switch, std::to_string(to), digest_of(w.bytes()));
  kernel_.runtime().switch_to(to);
}

void Scheduler::interrupt_point() {
  if (kernel_.runtime().stopping()) return;
  if (kind_ == SchedulerKind::null) return;
  TaskId self = kernel_.current_task();
  auto candidates = runnable();
  if (candidates.empty()) return;
  transfer(self, pick(self, candidates));
}

bool Scheduler::detect_deadlock() {
  auto waiting = blocked();
  if (waiting.empty() || !runnable().empty()) return false;
  std::string detail = "no runnable task; blocked:";
  for (auto t : waiting) detail += " " + std::to_string(t) + "(" + kernel_.runtime().blocked_reason(t) + ")";
  kernel_.raise_fault(FaultKind::deadlock, detail);
  return true;
}

void Scheduler::reschedule_away(TaskId from) {
  auto candidates = runnable();
  if (candidates.empty()) {
    detect_deadlock();
    kernel_.halt("deadlock ignored; nothing left to run");
  }
  transfer(from, pick(from, candidates));
}

void Scheduler::block(std::string channel) {
  if (kernel_.runtime().stopping()) return;
  TaskId self = kernel_.current_task();
  auto& e = table_[self];
  e.channel = channel;
  e.deficit = 0;
  kernel_.runtime().block(self, std::move(channel));
  reschedule_away(self);
}

void Scheduler::wake(TaskId id) {
  auto it = table_.find(id);
  if (it == table_.end()) return;
  if (kernel_.runtime().state(id) != TaskState::blocked) return;
  it->second.channel.clear();
  kernel_.runtime().unblock(id);
}

void Scheduler::wake_all(std::string_view channel) {
  for (auto& [id, e] : table_) {
    if (e.channel == channel && kernel_.runtime().state(id) == TaskState::blocked) {
      e.channel.clear();
      kernel_.runtime().unblock(id);
    }
  }
}

TaskId Scheduler::on_finished(TaskId finished) {
  wake_all("join:" + std::to_string(finished));
  if (finished == main_) {
    auto it = kernel_.guest().exit_values.find(finished);
    kernel_.finish_main(it == kernel_.guest().exit_values.end() ? 0 : it->second);
    return kKernelContext;
  }
  auto candidates = runnable();
  if (candidates.empty()) {
    detect_deadlock();
    kernel_.halt("deadlock ignored; nothing left to run");
  }
  TaskId next = pick(finished, candidates);
  ++decisions_;
  ByteWriter w;
  w.u32(next);
  kernel_.log(EventKind::task_switch, std::to_string(next), digest_of(w.bytes()));
  return next;
}

}  // namespace detos

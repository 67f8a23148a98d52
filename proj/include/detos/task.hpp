#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <ucontext.h>

namespace detos {

using TaskId = std::uint32_t;

// The context the runtime was started from; never a guest task.
inline constexpr TaskId kKernelContext = 0;

enum class TaskState { runnable, blocked, finished };

// Thrown on a task's own stack when its execution stops. Caught by the task
// trampoline; guest code must not swallow it.
struct StopSignal {};

/// Cooperative task primitives: creation of execution stacks and transfer of
/// control between them. Exactly one task (or the kernel context) executes
/// at any time, and only on the host thread that started the runtime.
///
/// A task that returns from its entry is finished and is never resumed. The
/// finish hook picks where control goes next.
class TaskRuntime {
 public:
  using FinishHook = std::function<TaskId(TaskId finished)>;

  explicit TaskRuntime(std::size_t max_tasks = 64, std::size_t stack_bytes = 256 * 1024);
  ~TaskRuntime();
  TaskRuntime(const TaskRuntime&) = delete;
  TaskRuntime& operator=(const TaskRuntime&) = delete;

  void set_finish_hook(FinishHook hook) { finish_hook_ = std::move(hook); }

  // New runnable task; it does not run until switched to. Throws TaskError
  // when the task cap is reached.
  TaskId create(std::function<void()> entry);

  // Transfers control to `target`; returns when some task switches back.
  // Self-switch is a no-op. Throws TaskError for finished, blocked or unknown
  // targets.
  void switch_to(TaskId target);

  // Kernel context only: enters `first` and returns once control comes back
  // to the kernel context.
  void start(TaskId first);

  void block(TaskId id, std::string reason);
  void unblock(TaskId id);

  TaskState state(TaskId id) const;
  const std::string& blocked_reason(TaskId id) const;
  bool started(TaskId id) const;
  TaskId current() const noexcept { return current_; }
  std::vector<TaskId> tasks() const;

  // After a stop request, no further switches happen and finishing tasks go
  // straight back to the kernel context.
  void request_stop() noexcept { stopping_ = true; }
  bool stopping() const noexcept { return stopping_; }

  // Kernel context only: unwinds the stacks of every started, unfinished task.
  void unwind_all();

  // Message of an exception that escaped a task entry, if any.
  const std::optional<std::string>& uncaught() const noexcept { return uncaught_; }

 private:
  struct Task;

  Task& task(TaskId id);
  const Task& task(TaskId id) const;
  void check_thread() const;
  ucontext_t* context_for(TaskId id);
  void jump(TaskId from, TaskId to);
  [[noreturn]] void leave_finished(TaskId next);
  static void trampoline();

  std::size_t max_tasks_;
  std::size_t stack_bytes_;
  std::vector<std::unique_ptr<Task>> tasks_;
  std::unique_ptr<struct KernelContext> kernel_;
  TaskId current_ = kKernelContext;
  FinishHook finish_hook_;
  bool stopping_ = false;
  bool unwinding_ = false;
  std::optional<std::string> uncaught_;
  std::optional<std::thread::id> owner_;
};

}  // namespace detos

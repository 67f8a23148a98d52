#include "detos/task.hpp"

#include <ucontext.h>

#include <cstdlib>

#include "detos/error.hpp"

namespace detos {

namespace {

// Unwinds a suspended task's stack during teardown.
struct UnwindSignal {};

thread_local TaskRuntime* tl_active = nullptr;

}  // namespace

struct KernelContext {
  ucontext_t ctx;
};

struct TaskRuntime::Task {
  TaskId id = 0;
  std::function<void()> entry;
  TaskState state = TaskState::runnable;
  std::string reason;
  std::unique_ptr<char[]> stack;
  ucontext_t ctx{};
  bool started = false;
};

TaskRuntime::TaskRuntime(std::size_t max_tasks, std::size_t stack_bytes)
    : max_tasks_(max_tasks), stack_bytes_(stack_bytes), kernel_(std::make_unique<KernelContext>()) {}

TaskRuntime::~TaskRuntime() {
  if (current_ == kKernelContext) {
    try {
      unwind_all();
    } catch (...) {
    }
  }
}

TaskRuntime::Task& TaskRuntime::task(TaskId id) {
  if (id == kKernelContext || id > tasks_.size()) throw TaskError("unknown task " + std::to_string(id));
  return *tasks_[id - 1];
}

const TaskRuntime::Task& TaskRuntime::task(TaskId id) const {
  if (id == kKernelContext || id > tasks_.size()) throw TaskError("unknown task " + std::to_string(id));
  return *tasks_[id - 1];
}

void TaskRuntime::check_thread() const {
  if (owner_ && *owner_ != std::this_thread::get_id())
    throw TaskError("task runtime entered from a foreign host thread");
}

TaskId TaskRuntime::create(std::function<void()> entry) {
  if (tasks_.size() >= max_tasks_) throw TaskError("task limit of " + std::to_string(max_tasks_) + " reached");
  auto t = std::make_unique<Task>();
  t->id = static_cast<TaskId>(tasks_.size() + 1);
  t->entry = std::move(entry);
  tasks_.push_back(std::move(t));
  return tasks_.back()->id;
}

TaskState TaskRuntime::state(TaskId id) const { return task(id).state; }
const std::string& TaskRuntime::blocked_reason(TaskId id) const { return task(id).reason; }
bool TaskRuntime::started(TaskId id) const { return task(id).started; }

std::vector<TaskId> TaskRuntime::tasks() const {
  std::vector<TaskId> ids;
  for (const auto& t : tasks_) ids.push_back(t->id);
  return ids;
}

void TaskRuntime::block(TaskId id, std::string reason) {
  auto& t = task(id);
  if (t.state == TaskState::finished) throw TaskError("cannot block finished task " + std::to_string(id));
  t.state = TaskState::blocked;
  t.reason = std::move(reason);
}

void TaskRuntime::unblock(TaskId id) {
  auto& t = task(id);
  if (t.state != TaskState::blocked) return;
  t.state = TaskState::runnable;
  t.reason.clear();
}

ucontext_t* TaskRuntime::context_for(TaskId id) {
  if (id == kKernelContext) return &kernel_->ctx;
  auto& t = task(id);
  if (!t.started) {
    t.stack.reset(new char[stack_bytes_]);
    getcontext(&t.ctx);
    t.ctx.uc_stack.ss_sp = t.stack.get();
    t.ctx.uc_stack.ss_size = stack_bytes_;
    t.ctx.uc_link = nullptr;
    makecontext(&t.ctx, &TaskRuntime::trampoline, 0);
    t.started = true;
  }
  return &t.ctx;
}

void TaskRuntime::jump(TaskId from, TaskId to) {
  ucontext_t* from_ctx = context_for(from);
  ucontext_t* to_ctx = context_for(to);
  current_ = to;
  swapcontext(from_ctx, to_ctx);
}

void TaskRuntime::switch_to(TaskId target) {
  check_thread();
  if (stopping_) return;
  if (target == current_) return;
  if (target == kKernelContext) throw TaskError("tasks cannot switch to the kernel context directly");
  const auto& t = task(target);
  if (t.state == TaskState::finished) throw TaskError("switch to finished task " + std::to_string(target));
  if (t.state == TaskState::blocked) throw TaskError("switch to blocked task " + std::to_string(target));

  jump(current_, target);
  if (unwinding_) throw UnwindSignal{};
}

void TaskRuntime::start(TaskId first) {
  if (current_ != kKernelContext) throw TaskError("start() called from inside a task");
  owner_ = std::this_thread::get_id();
  if (task(first).state != TaskState::runnable) throw TaskError("start() needs a runnable task");
  TaskRuntime* saved = tl_active;
  tl_active = this;
  jump(kKernelContext, first);
  tl_active = saved;
}

void TaskRuntime::unwind_all() {
  if (current_ != kKernelContext) throw TaskError("unwind_all() called from inside a task");
  stopping_ = true;
  unwinding_ = true;
  TaskRuntime* saved = tl_active;
  tl_active = this;
  for (auto& t : tasks_) {
    if (t->state == TaskState::finished) continue;
    if (!t->started) {
      t->state = TaskState::finished;
      continue;
    }
    jump(kKernelContext, t->id);
  }
  tl_active = saved;
}

void TaskRuntime::leave_finished(TaskId next) {
  ucontext_t* to_ctx = context_for(next);
  current_ = next;
  setcontext(to_ctx);
  std::abort();
}

void TaskRuntime::trampoline() {
  TaskRuntime* rt = tl_active;
  TaskId self = rt->current_;
  {
    auto& t = rt->task(self);
    try {
      if (!rt->stopping_) t.entry();
    } catch (const StopSignal&) {
    } catch (const UnwindSignal&) {
    } catch (const std::exception& e) {
      if (!rt->uncaught_) rt->uncaught_ = e.what();
      rt->stopping_ = true;
    } catch (...) {
      if (!rt->uncaught_) rt->uncaught_ = "unknown exception";
      rt->stopping_ = true;
    }
    t.state = TaskState::finished;
    t.entry = nullptr;
  }

  TaskId next = kKernelContext;
  if (!rt->stopping_ && rt->finish_hook_) {
    try {
      next = rt->finish_hook_(self);
    } catch (const StopSignal&) {
      next = kKernelContext;
    } catch (const std::exception& e) {
      if (!rt->uncaught_) rt->uncaught_ = e.what();
      rt->stopping_ = true;
      next = kKernelContext;
    }
  }
  if (rt->stopping_) next = kKernelContext;
  if (next != kKernelContext && rt->task(next).state != TaskState::runnable) {
    rt->uncaught_ = "finish hook selected non-runnable task " + std::to_string(next);
    rt->stopping_ = true;
    next = kKernelContext;
  }
  rt->leave_finished(next);
}

}  // namespace detos

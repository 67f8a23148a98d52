#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detos/choice.hpp"
#include "detos/component.hpp"
#include "detos/config.hpp"
#include "detos/event_log.hpp"
#include "detos/fault.hpp"
#include "detos/guest_state.hpp"
#include "detos/host_hook.hpp"
#include "detos/input_store.hpp"
#include "detos/syscall.hpp"
#include "detos/task.hpp"

namespace detos {

class Guest;
class Scheduler;
class Filesystem;
class VirtualClock;
class ProxyComponent;
class ReplayComponent;
class SyscallTrace;

using GuestMain = std::function<int(Guest&)>;

enum class Outcome {
  exited,       // guest exit or main returned
  fault,        // a reported fault: this run is a verdict
  depth_bound,  // choice log hit max_depth
  halted,       // no runnable task left after an ignored deadlock
  error,        // an exception escaped guest code
};

std::string_view outcome_name(Outcome o);

struct Leak {
  std::uint64_t id = 0;
  std::size_t size = 0;
  friend bool operator==(const Leak&, const Leak&) = default;
};

struct RunResult {
  Outcome outcome = Outcome::exited;
  int exit_code = 0;
  std::optional<FaultKind> fault;
  std::string detail;
  ChoiceLog choices;
  EventLog events;
  std::string console_out;
  std::string console_err;
  std::vector<Leak> leaks;  // allocations live at normal exit, by id
  std::shared_ptr<const SyscallTrace> trace;  // recorded by the proxy
  std::uint64_t host_calls = 0;

  bool is_verdict() const noexcept { return outcome == Outcome::fault; }
  bool diverged() const noexcept { return fault == FaultKind::replay_divergence; }
};

/// One booted instance of the model OS. It runs exactly one execution; all
/// of its state (filesystem, clock, tasks, logs) dies with it.
class Kernel {
 public:
  // Throws ConfigError for invalid or incompatible configurations.
  static std::unique_ptr<Kernel> boot(Config cfg, ChoiceSource source = ChoiceSource::explorer({}),
                                      InputStore inputs = {});
  ~Kernel();
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  RunResult run(const GuestMain& main);

  // Routes to the topmost implementing component. Throws MalformedRequest
  // before any component sees a request with the wrong argument shape.
  SyscallResult dispatch(SyscallRequest req);

  // Logs the fault; a reported fault stops the execution (does not return).
  void raise_fault(FaultKind kind, std::string detail);

  // The choice operator. `origin` tags the choice event (sched, clock, ...).
  std::uint32_t choose(std::uint32_t arity, std::string_view origin);

  Bytes indeterminate_bytes(const std::string& label, std::size_t length);

  [[noreturn]] void exit(int code);
  [[noreturn]] void halt(std::string why);
  // Called when the main task returns.
  void finish_main(int code);

  void log(EventKind kind, std::string name, std::uint64_t digest);
  void console_write(int fd, std::span<const std::uint8_t> data);

  const Config& config() const noexcept { return cfg_; }
  const ComponentStack& components() const noexcept { return stack_; }
  const EventLog& events() const noexcept { return events_; }
  const ChoiceLog& choices() const noexcept { return source_.log(); }
  TaskRuntime& runtime() noexcept { return runtime_; }
  TaskId current_task() const noexcept { return runtime_.current(); }
  TaskId main_task() const noexcept { return main_task_; }
  GuestState& guest() noexcept { return guest_; }
  HostHook& host() noexcept { return host_; }
  const InputStore& inputs() const noexcept { return inputs_; }

  Scheduler& scheduler() noexcept { return *scheduler_; }
  Filesystem* filesystem() noexcept { return vfs_; }
  VirtualClock* clock() noexcept { return clock_; }
  ProxyComponent* proxy() noexcept { return proxy_; }
  ReplayComponent* replay() noexcept { return replay_; }

 private:
  struct Stop {
    Outcome outcome;
    int exit_code = 0;
    std::optional<FaultKind> fault;
    std::string detail;
  };

  Kernel(Config cfg, ChoiceSource source, InputStore inputs);
  void build_stack();
  [[noreturn]] void stop(Stop s);

  Config cfg_;
  ChoiceSource source_;
  InputStore inputs_;
  IndeterminateInputs indeterminate_;
  EventLog events_;
  TaskRuntime runtime_;
  HostHook host_;
  GuestState guest_;
  ComponentStack stack_;
  std::string console_[2];

  Scheduler* scheduler_ = nullptr;
  Filesystem* vfs_ = nullptr;
  VirtualClock* clock_ = nullptr;
  ProxyComponent* proxy_ = nullptr;
  ReplayComponent* replay_ = nullptr;

  TaskId main_task_ = kKernelContext;
  const GuestMain* main_ = nullptr;
  bool ran_ = false;
  std::optional<Stop> stop_;
};

}  // namespace detos

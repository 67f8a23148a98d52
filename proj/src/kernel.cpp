#include "detos/kernel.hpp"

#include <cerrno>

#include "detos/clock.hpp"
#include "detos/error.hpp"
#include "detos/guest.hpp"
#include "detos/hostproxy.hpp"
#include "detos/scheduler.hpp"
#include "detos/vfs.hpp"

namespace detos {

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::exited: return "exited";
    case Outcome::fault: return "fault";
    case Outcome::depth_bound: return "depth-bound";
    case Outcome::halted: return "halted";
    case Outcome::error: return "error";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ComponentStack

void ComponentStack::push_bottom(std::unique_ptr<Component> c) {
  if (sealed_) throw ConfigError("component stack is sealed");
  components_.push_back(std::move(c));
}

void ComponentStack::seal() {
  if (components_.empty()) throw ConfigError("empty component stack");
  for (auto s : all_syscalls())
    if (!components_.back()->implements(s))
      throw ConfigError("bottom component '" + components_.back()->name() + "' does not cover " +
                        std::string(sys_name(s)));
  for (auto s : all_syscalls()) {
    for (std::size_t i = 0; i < components_.size(); ++i) {
      if (components_[i]->implements(s)) {
        table_[static_cast<std::size_t>(s)] = i;
        break;
      }
    }
  }
  sealed_ = true;
}

Component& ComponentStack::resolve_below(const Component& from, Sys s) const {
  bool below = false;
  for (const auto& c : components_) {
    if (below && c->implements(s)) return *c;
    if (c.get() == &from) below = true;
  }
  throw ConfigError("no component below '" + from.name() + "' implements " + std::string(sys_name(s)));
}

std::vector<std::string> ComponentStack::names() const {
  std::vector<std::string> out;
  for (const auto& c : components_) out.push_back(c->name());
  return out;
}

// ---------------------------------------------------------------------------
// Stub

namespace {

class StubComponent : public Component {
 public:
  explicit StubComponent(Kernel& k) : kernel_(k) {}
  std::string name() const override { return "stub"; }
  bool implements(Sys) const override { return true; }
  SyscallResult handle(const SyscallRequest& req) override {
    kernel_.raise_fault(FaultKind::unsupported_syscall,
                        "system call " + std::string(sys_name(req.name)) + " is not supported");
    return SyscallResult::fail(ENOSYS);
  }

 private:
  Kernel& kernel_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Kernel

std::unique_ptr<Kernel> Kernel::boot(Config cfg, ChoiceSource source, InputStore inputs) {
  if (!cfg.faults.valid()) throw ConfigError("replay-divergence faults cannot be ignored");
  if (cfg.max_depth == 0) throw ConfigError("max_depth must be positive");
  if (cfg.max_tasks == 0) throw ConfigError("max_tasks must be positive");
  if (cfg.fair_bound == 0) throw ConfigError("fair_bound must be positive");
  if (cfg.fs == FsProvider::replay && !cfg.trace && !cfg.replay_trace)
    throw ConfigError("replay filesystem provider needs a trace");
  if (cfg.fs == FsProvider::proxy) {
    if (!cfg.host_hook) throw ConfigError("proxy filesystem provider needs the host hook enabled");
    if (!cfg.sandbox) throw ConfigError("proxy filesystem provider needs a sandbox directory");
    if (!std::filesystem::is_directory(*cfg.sandbox))
      throw ConfigError("sandbox '" + cfg.sandbox->string() + "' is not a directory");
  }
  if (cfg.preload && cfg.fs != FsProvider::vfs) throw ConfigError("preload manifests need the vfs provider");
  if (cfg.clock.quantum_ns <= 0) throw ConfigError("clock quantum must be positive");

  std::unique_ptr<Kernel> k(new Kernel(std::move(cfg), std::move(source), std::move(inputs)));
  k->build_stack();
  return k;
}

Kernel::Kernel(Config cfg, ChoiceSource source, InputStore inputs)
    : cfg_(std::move(cfg)),
      source_(std::move(source)),
      inputs_(std::move(inputs)),
      indeterminate_(inputs_, cfg_.input_policy, cfg_.input_alphabet),
      runtime_(cfg_.max_tasks, cfg_.stack_bytes),
      host_(cfg_.host_hook) {}

Kernel::~Kernel() = default;

void Kernel::build_stack() {
  auto sched = std::make_unique<Scheduler>(*this, cfg_.scheduler, cfg_.fair_bound);
  scheduler_ = sched.get();
  stack_.push_bottom(std::move(sched));

  bool virtual_clock = cfg_.clock.mode != ClockMode::off;
  switch (cfg_.fs) {
    case FsProvider::vfs: {
      auto fs = std::make_unique<Filesystem>(*this, cfg_.vfs_checks);
      vfs_ = fs.get();
      stack_.push_bottom(std::move(fs));
      break;
    }
    case FsProvider::proxy: {
      auto proxy = std::make_unique<ProxyComponent>(*this, host_, *cfg_.sandbox, cfg_.behaviour_digest());
      proxy_ = proxy.get();
      stack_.push_bottom(std::move(proxy));
      virtual_clock = false;
      break;
    }
    case FsProvider::replay: {
      auto trace = cfg_.replay_trace;
      if (!trace) trace = std::make_shared<SyscallTrace>(SyscallTrace::load(*cfg_.trace));
      if (trace->config_digest != cfg_.behaviour_digest())
        throw ConfigError("trace was recorded under a different configuration");
      auto replay = std::make_unique<ReplayComponent>(*this, std::move(trace));
      replay_ = replay.get();
      stack_.push_bottom(std::move(replay));
      virtual_clock = false;
      break;
    }
    case FsProvider::none:
      break;
  }
  if (virtual_clock) {
    auto clock = std::make_unique<VirtualClock>(*this, cfg_.clock);
    clock_ = clock.get();
    stack_.push_bottom(std::move(clock));
  }
  stack_.push_bottom(std::make_unique<StubComponent>(*this));
  stack_.seal();

  main_task_ = runtime_.create([this] {
    Guest g(*this);
    int rc = (*main_)(g);
    guest_.exit_values[main_task_] = rc;
  });
  scheduler_->register_main(main_task_);
  runtime_.set_finish_hook([this](TaskId t) { return scheduler_->on_finished(t); });

  if (vfs_) {
    Bytes stdin_data;
    if (inputs_.contains("stdin")) stdin_data = inputs_.at("stdin");
    vfs_->attach_stdio(std::move(stdin_data));
    if (cfg_.preload) vfs_->preload(*cfg_.preload);
  }
}

RunResult Kernel::run(const GuestMain& main) {
  if (ran_) throw Error("a kernel instance runs exactly one execution");
  ran_ = true;
  main_ = &main;

  runtime_.start(main_task_);
  runtime_.unwind_all();

  if (runtime_.uncaught() && (!stop_ || stop_->outcome == Outcome::exited))
    stop_ = Stop{Outcome::error, 0, std::nullopt, "uncaught exception in guest: " + *runtime_.uncaught()};
  if (!stop_) stop_ = Stop{Outcome::error, 0, std::nullopt, "execution ended without a verdict or exit"};

  if (stop_->outcome == Outcome::exited && source_.unconsumed() > 0) {
    std::string detail = std::to_string(source_.unconsumed()) + " recorded choices were never consumed";
    events_.append(kKernelContext, EventKind::fault, std::string(fault_name(FaultKind::replay_divergence)),
                   digest_of(detail));
    stop_ = Stop{Outcome::fault, 0, FaultKind::replay_divergence, detail};
  }

  RunResult r;
  r.outcome = stop_->outcome;
  r.exit_code = stop_->exit_code;
  r.fault = stop_->fault;
  r.detail = stop_->detail;
  r.choices = source_.log();
  r.events = events_;
  r.console_out = console_[0];
  r.console_err = console_[1];
  if (r.outcome == Outcome::exited)
    for (const auto& [id, data] : guest_.allocations) r.leaks.push_back({id, data.size()});
  if (proxy_) r.trace = std::make_shared<SyscallTrace>(proxy_->trace());
  r.host_calls = host_.calls();
  return r;
}

SyscallResult Kernel::dispatch(SyscallRequest req) {
  if (!well_formed(req)) throw MalformedRequest("malformed request: " + describe(req.name, req.args));
  req.task = current_task();
  log(EventKind::syscall_enter, std::string(sys_name(req.name)), args_digest(req));
  auto result = stack_.resolve(req.name).handle(req);
  log(EventKind::syscall_exit, std::string(sys_name(req.name)), result_digest(result));
  return result;
}

void Kernel::raise_fault(FaultKind kind, std::string detail) {
  if (runtime_.stopping()) return;
  log(EventKind::fault, std::string(fault_name(kind)), digest_of(detail));
  if (kind == FaultKind::replay_divergence || cfg_.faults.action(kind) == FaultAction::report)
    stop(Stop{Outcome::fault, 0, kind, std::move(detail)});
}

std::uint32_t Kernel::choose(std::uint32_t arity, std::string_view origin) {
  if (runtime_.stopping()) return 0;
  if (source_.log().size() >= cfg_.max_depth)
    stop(Stop{Outcome::depth_bound, 0, std::nullopt,
              "choice log reached max depth " + std::to_string(cfg_.max_depth)});
  std::uint32_t chosen = 0;
  try {
    chosen = source_.next(arity);
  } catch (const DivergenceError& e) {
    raise_fault(FaultKind::replay_divergence, e.what());
  }
  ByteWriter w;
  w.u32(arity);
  w.u32(chosen);
  log(EventKind::choice, std::string(origin), digest_of(w.bytes()));
  return chosen;
}

Bytes Kernel::indeterminate_bytes(const std::string& label, std::size_t length) {
  return indeterminate_.get(label, length, [this](std::uint32_t arity) { return choose(arity, "input"); });
}

void Kernel::exit(int code) {
  if (!runtime_.stopping()) {
    ByteWriter w;
    w.i32(code);
    log(EventKind::exit, "code=" + std::to_string(code), digest_of(w.bytes()));
  }
  stop(Stop{Outcome::exited, code, std::nullopt, {}});
}

void Kernel::halt(std::string why) { stop(Stop{Outcome::halted, 0, std::nullopt, std::move(why)}); }

void Kernel::finish_main(int code) {
  if (runtime_.stopping()) return;
  ByteWriter w;
  w.i32(code);
  log(EventKind::exit, "code=" + std::to_string(code), digest_of(w.bytes()));
  if (!stop_) stop_ = Stop{Outcome::exited, code, std::nullopt, {}};
  runtime_.request_stop();
}

void Kernel::stop(Stop s) {
  if (!stop_) stop_ = std::move(s);
  runtime_.request_stop();
  throw StopSignal{};
}

void Kernel::log(EventKind kind, std::string name, std::uint64_t digest) {
  if (runtime_.stopping()) return;
  events_.append(current_task(), kind, std::move(name), digest);
}

void Kernel::console_write(int fd, std::span<const std::uint8_t> data) {
  if (fd != 1 && fd != 2) return;
  console_[fd - 1].append(data.begin(), data.end());
}

}  // namespace detos

#include <fcntl.h>

#include <cerrno>
#include <gtest/gtest.h>

#include "detos/error.hpp"
#include "detos/explorer.hpp"
#include "detos/guest.hpp"

using namespace detos;

namespace {

RunResult run(const GuestMain& main, Config cfg = {}, ChoiceSource src = ChoiceSource::explorer({})) {
  return Kernel::boot(std::move(cfg), std::move(src))->run(main);
}

}  // namespace

TEST(Boot, DefaultStack) {
  auto k = Kernel::boot({});
  EXPECT_EQ(k->components().names(), (std::vector<std::string>{"scheduler(async)", "vfs", "clock", "stub"}));
}

TEST(Boot, StackFollowsConfiguration) {
  Config cfg;
  cfg.scheduler = SchedulerKind::null;
  cfg.fs = FsProvider::none;
  cfg.clock.mode = ClockMode::off;
  EXPECT_EQ(Kernel::boot(cfg)->components().names(), (std::vector<std::string>{"scheduler(null)", "stub"}));
}

TEST(Boot, ReplayProviderNeedsATrace) {
  Config cfg;
  cfg.fs = FsProvider::replay;
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
}

TEST(Boot, ProxyNeedsHookAndSandbox) {
  Config cfg;
  cfg.fs = FsProvider::proxy;
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
  cfg.host_hook = true;
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
  cfg.sandbox = "/definitely/not/a/dir";
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
}

TEST(Boot, DivergenceCannotBeIgnored) {
  Config cfg;
  cfg.faults.set(FaultKind::replay_divergence, FaultAction::ignore);
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
}

TEST(Boot, FreshInstancesStartEmpty) {
  auto a = Kernel::boot({});
  auto b = Kernel::boot({});
  EXPECT_TRUE(a->events().empty());
  EXPECT_EQ(a->events(), b->events());
}

TEST(Config, SettingsParseAndReject) {
  Config cfg;
  apply_setting(cfg, "scheduler", "fair");
  apply_setting(cfg, "fault.assertion", "ignore");
  apply_setting(cfg, "clock.mode", "shift");
  EXPECT_EQ(cfg.scheduler, SchedulerKind::async_fair);
  EXPECT_EQ(cfg.faults.action(FaultKind::assertion), FaultAction::ignore);
  EXPECT_EQ(cfg.clock.mode, ClockMode::indeterminate_shift);
  EXPECT_THROW(apply_setting(cfg, "scheduler", "lottery"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "no.such.key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "fault.gremlins", "report"), ConfigError);
}

TEST(Kernel, RunsExactlyOnce) {
  auto k = Kernel::boot({});
  GuestMain main = [](Guest&) { return 0; };
  k->run(main);
  EXPECT_THROW(k->run(main), Error);
}

TEST(Dispatch, OpenatIsHandledByTheVfs) {
  auto k = Kernel::boot({});
  EXPECT_EQ(k->components().resolve(Sys::openat).name(), "vfs");
  EXPECT_EQ(k->components().resolve(Sys::clock_gettime).name(), "clock");
  EXPECT_EQ(k->components().resolve(Sys::thread_create).name(), "scheduler(async)");
}

TEST(Dispatch, WithoutFilesystemTheStubRaisesUnsupported) {
  Config cfg;
  cfg.fs = FsProvider::none;
  auto r = run([](Guest& g) { return g.open("/x", O_CREAT | O_WRONLY); }, cfg);
  EXPECT_EQ(r.outcome, Outcome::fault);
  EXPECT_EQ(r.fault, FaultKind::unsupported_syscall);
  EXPECT_NE(r.detail.find("openat"), std::string::npos);
}

TEST(Dispatch, IgnoredUnsupportedSyscallReturnsEnosys) {
  Config cfg;
  cfg.fs = FsProvider::none;
  cfg.faults.set(FaultKind::unsupported_syscall, FaultAction::ignore);
  int seen_errno = 0;
  auto r = run(
      [&](Guest& g) {
        g.open("/x", O_RDONLY);
        seen_errno = g.err();
        return 0;
      },
      cfg);
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(seen_errno, ENOSYS);
  EXPECT_EQ(r.events.count(EventKind::fault), 1u);
}

TEST(Dispatch, MalformedRequestIsRejectedBeforeAnyComponent) {
  bool rejected = false;
  auto r = run([&](Guest& g) {
    try {
      g.kernel().dispatch({Sys::openat, {Path{"/x"}}});
    } catch (const MalformedRequest&) {
      rejected = true;
    }
    return 0;
  });
  EXPECT_TRUE(rejected);
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(r.events.count(EventKind::fault), 0u);
  EXPECT_EQ(r.events.count(EventKind::syscall_enter), 0u);
}

TEST(Faults, ReportedAssertionIsAVerdictWithTheFullChoiceLog) {
  auto r = run([](Guest& g) {
    auto t = g.thread_create([](Guest&) { return 0; });
    g.interrupt_point();
    g.thread_join(t);
    g.assert_that(false, "boom");
    return 0;
  });
  EXPECT_TRUE(r.is_verdict());
  EXPECT_EQ(r.fault, FaultKind::assertion);
  EXPECT_EQ(r.detail, "boom");
  EXPECT_EQ(r.choices.size(), 1u);
  EXPECT_EQ(r.events.back().kind, EventKind::fault);
}

TEST(Faults, IgnoredAllocationFailureContinuesAndIsLogged) {
  Config cfg;
  cfg.inject_alloc_faults = true;
  cfg.faults.set(FaultKind::allocation_failure_unhandled, FaultAction::ignore);
  auto r = run(
      [](Guest& g) {
        g.alloc_checked(8);
        g.write(1, "still here");
        return 0;
      },
      cfg, ChoiceSource::scripted({{2, 1}}));
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(r.console_out, "still here");
  EXPECT_EQ(r.events.count(EventKind::fault), 1u);
}

TEST(Exit, ExitCodeIsTheFinalEvent) {
  auto r = run([](Guest& g) -> int { g.exit(3); });
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.events.back().kind, EventKind::exit);
  EXPECT_EQ(r.events.back().name, "code=3");
}

TEST(Exit, ReturningFromMainExitsWithItsValue) {
  auto r = run([](Guest&) { return 5; });
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events.back().name, "code=5");
}

TEST(Exit, ExitFromAThreadEndsEveryTask) {
  auto r = run([](Guest& g) {
    g.thread_create([](Guest& t) -> int { t.exit(9); });
    while (true) g.interrupt_point();
    return 0;
  }, {}, ChoiceSource::scripted({{2, 1}}));
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(r.exit_code, 9);
}

TEST(Outcome, UncaughtGuestExceptionIsAnError) {
  auto r = run([](Guest&) -> int { throw std::runtime_error("guest bug"); });
  EXPECT_EQ(r.outcome, Outcome::error);
  EXPECT_NE(r.detail.find("guest bug"), std::string::npos);
}

TEST(Outcome, UnusedScriptedChoicesAreADivergence) {
  auto r = run([](Guest&) { return 0; }, {}, ChoiceSource::scripted({{2, 0}}));
  EXPECT_TRUE(r.diverged());
}

TEST(Outcome, DepthBoundIsNotAVerdict) {
  Config cfg;
  cfg.max_depth = 5;
  auto r = run(
      [](Guest& g) {
        g.thread_create([](Guest&) { return 0; });
        while (true) g.interrupt_point();
        return 0;
      },
      cfg);
  EXPECT_EQ(r.outcome, Outcome::depth_bound);
  EXPECT_FALSE(r.is_verdict());
  EXPECT_EQ(r.choices.size(), 5u);
}

TEST(Leaks, LiveAllocationsAreReportedAtExitInIdOrder) {
  auto r = run([](Guest& g) {
    auto a = g.alloc(10);
    g.alloc(20);
    g.alloc(30);
    g.free(a);
    return 0;
  });
  EXPECT_EQ(r.leaks, (std::vector<Leak>{{2, 20}, {3, 30}}));
}

TEST(Console, StdoutAndStderrAreCaptured) {
  auto r = run([](Guest& g) {
    g.write(1, "out");
    g.write(2, "err");
    return 0;
  });
  EXPECT_EQ(r.console_out, "out");
  EXPECT_EQ(r.console_err, "err");
}

TEST(Console, StdinComesFromTheInputStore) {
  InputStore in;
  in.set("stdin", to_bytes("typed"));
  auto k = Kernel::boot({}, ChoiceSource::explorer({}), in);
  std::string got;
  k->run([&](Guest& g) {
    got = g.read_text(0);
    return 0;
  });
  EXPECT_EQ(got, "typed");
}

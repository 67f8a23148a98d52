// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <fcntl.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "detos/error.hpp"
#include "detos/explorer.hpp"
#include "detos/guest.hpp"
#include "detos/hostproxy.hpp"
#include "detos/programs.hpp"
#include "oracles.hpp"

using namespace detos;
namespace fs = std::filesystem;

namespace {

// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::size_t count = 0;
  std::string note;

  void operator()(bool ok, const std::string& what) {
    ++count;
    if (!ok) failures.push_back(what);
  }
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<void(Check&)> body;
};

const Program& program(std::string_view name) {
  const auto* p = builtin_programs().find(name);
  if (!p) throw std::runtime_error("no program " + std::string(name));
  return *p;
}

std::string trimmed(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

fs::path fresh_dir(const std::string& tag) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("detos-accept-" + tag + "-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> names;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) names.insert(e.path().filename().string());
  return names;
}

// --- criteria ------------------------------------------------------------------

void determinism(Check& check) {
  const char* fixtures[] = {"hello",          "files",         "pipes",         "sockets",   "hardlinks",
                            "create_f",       "touch",         "symlink_loop",  "interleave2x2",
                            "interleave2x3",  "counter",       "counter_locked", "deadlock_abba",
                            "busywait",       "condvar",       "exit_values",   "alloc3",    "leak",
                            "clock_ticks",    "double_free",   "selfjoin"};
  std::size_t n = 0;
  for (auto name : fixtures) {
    const auto& p = program(name);
    check(check_determinism(p.main, p.config, 100), std::string(name) + " event logs differ across 100 runs");
    ++n;
  }
  // Non-default schedules too: a random choice log replayed 100 times.
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& p = program("interleave2x3");
    auto first = run_once(p.main, p.config, ChoiceSource::random(seed));
    bool same = true;
    for (int i = 0; i < 100; ++i) same = same && replay(p.main, p.config, first.choices).events == first.events;
    check(same, "interleave2x3 seed " + std::to_string(seed) + " replays differ");
  }
  check(n >= 12, "fewer than 12 fixtures");
  std::ostringstream os;
  os << n << " fixtures x 100 runs";
  check.note = os.str();
}

void isolation(Check& check) {
  auto cwd_before = listing(fs::current_path());
  auto tmp_before = listing(fs::temp_directory_path());
  const auto& p = program("create_f");
  for (int i = 0; i < 50; ++i) {
    auto r = run_once(p.main, p.config, ChoiceSource::explorer({}));
    check(r.outcome == Outcome::exited && r.exit_code == 0, "run " + std::to_string(i) + " saw /f: " + r.detail);
  }
  check(listing(fs::current_path()) == cwd_before, "working directory changed");
  check(listing(fs::temp_directory_path()) == tmp_before, "temp directory changed");
  check.note = "50 instances";
}

void interleavings(Check& check) {
  for (auto [a, b] : {std::pair{2, 2}, std::pair{3, 3}}) {
    std::set<std::string> seen;
    ExploreOptions opts;
    opts.on_execution = [&](const RunResult& r) { seen.insert(trimmed(r.console_out)); };
    auto res = explore(interleave_program(a, b), {}, {}, {}, opts);
    auto expected = oracle::interleavings(a, b);
    std::string tag = std::to_string(a) + "x" + std::to_string(b);
    check(res.complete(), tag + " incomplete");
    check(res.executions == expected.size(), tag + " executions " + std::to_string(res.executions));
    check(res.distinct_event_logs == expected.size(), tag + " distinct logs");
    check(seen == expected, tag + " orders differ from the merge model");
    check.note += tag + "=" + std::to_string(res.executions) + " ";
  }
}

void race(Check& check) {
  const auto& racy = program("counter");
  std::set<int> finals;
  ExploreOptions opts;
  opts.on_execution = [&](const RunResult& r) {
    auto pos = r.console_out.find("counter=");
    if (pos != std::string::npos) finals.insert(std::stoi(r.console_out.substr(pos + 8)));
  };
  auto res = explore(racy.main, racy.config, {}, {}, opts);
  check(finals == oracle::racy_counter_outcomes(), "final counter values differ from the model");
  check(!res.verdicts.empty(), "no verdict for the unlocked counter");
  for (const auto& v : res.verdicts) {
    check(v.kind == FaultKind::assertion && v.confirmed, "unconfirmed verdict");
    auto again = replay(racy.main, racy.config, v.choices);
    check(again.fault == FaultKind::assertion && again.events == v.events, "verdict does not replay");
  }
  const auto& locked = program("counter_locked");
  auto clean = explore(locked.main, locked.config);
  check(clean.complete() && clean.verdicts.empty(), "locked counter has verdicts");
  check.note = std::to_string(res.verdicts.size()) + " racy verdicts, locked clean";
}

void deadlock(Check& check) {
  const auto& p = program("deadlock_abba");
  auto res = explore(p.main, p.config);
  check(res.complete(), "incomplete");
  check(!res.verdicts.empty(), "no deadlock found");
  for (const auto& v : res.verdicts) {
    check(v.kind == FaultKind::deadlock, "verdict is not a deadlock");
    auto again = replay(p.main, p.config, v.choices);
    check(again.fault == FaultKind::deadlock && again.events == v.events, "deadlock does not replay");
  }
  check.note = std::to_string(res.verdicts.size()) + " deadlock schedules";
}

void fairness(Check& check) {
  const auto& p = program("busywait");
  auto fair = explore(p.main, p.config);
  check(fair.complete() && fair.depth_bound_hits == 0, "fair scheduler did not terminate everywhere");
  check(fair.executions == oracle::fair_busywait_leaves(p.config.fair_bound), "fair leaf count");
  Config async = p.config;
  async.scheduler = SchedulerKind::async_safety;
  auto unfair = explore(p.main, async, {.max_executions = 500, .max_depth = 64});
  check(unfair.depth_bound_hits > 0, "async scheduler never hit the depth bound");
  check.note = "fair " + std::to_string(fair.executions) + " leaves, async " +
               std::to_string(unfair.depth_bound_hits) + " depth-bound hits";
}

void allocation(Check& check) {
  const auto& p = program("alloc3");
  std::set<std::string> seen;
  ExploreOptions opts;
  opts.on_execution = [&](const RunResult& r) {
    auto s = trimmed(r.console_out);
    seen.insert(s.substr(s.find(' ') + 1));
  };
  auto res = explore(p.main, p.config, {}, {}, opts);
  check(res.executions == 8, "expected 8 executions, got " + std::to_string(res.executions));
  check(seen == oracle::allocation_outcomes(3), "outcomes differ from the model");
  check(res.verdicts.empty(), "handled failures produced verdicts");
  check.note = std::to_string(res.executions) + " leaves";
}

void clock_rules(Check& check) {
  const std::int64_t q = 1'000'000;
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    ChoiceLog script;
    std::vector<std::int64_t> expected, got;
    std::int64_t ticks = 0;
    for (int i = 0; i < 4; ++i) {
      script.append({2, (mask >> i) & 1});
      ticks += (mask >> i) & 1;
      expected.push_back(ticks * q);
    }
    Kernel::boot({}, ChoiceSource::scripted(script))->run([&](Guest& g) {
      for (int i = 0; i < 4; ++i) got.push_back(g.clock_gettime(CLOCK_MONOTONIC));
      return 0;
    });
    check(got == expected, "tick arithmetic for mask " + std::to_string(mask));
  }
  for (auto mode : {ClockMode::fixed_tick, ClockMode::indeterminate_shift}) {
    Config cfg;
    cfg.clock.mode = mode;
    cfg.max_depth = 20'000;
    std::vector<std::int64_t> reads;
    Kernel::boot(cfg, ChoiceSource::random(77))->run([&](Guest& g) {
      for (int i = 0; i < 10'000; ++i) reads.push_back(g.clock_gettime(CLOCK_MONOTONIC));
      return 0;
    });
    bool monotonic = reads.size() == 10'000;
    for (std::size_t i = 1; i < reads.size(); ++i) monotonic = monotonic && reads[i - 1] <= reads[i];
    check(monotonic, std::string("monotonic reads went backwards in ") + std::string(clock_mode_name(mode)));
  }
  int err = 0;
  Kernel::boot({})->run([&](Guest& g) {
    g.clock_settime(CLOCK_REALTIME, 5'000'000'000);
    check(g.clock_gettime(CLOCK_REALTIME) >= 5'000'000'000, "wall clock set");
    g.clock_settime(CLOCK_MONOTONIC, 0);
    err = g.err();
    return 0;
  });
  check(err == EINVAL, "monotonic clock settable");
  check.note = "16 tick scripts, 2x10000 random reads";
}

void vfs_semantics(Check& check) {
  Config cfg;
  cfg.vfs_checks = true;
  auto r = Kernel::boot(cfg)->run([&](Guest& g) {
    FileStat st;
    check(g.open("/nope", O_RDONLY) == -1 && g.err() == ENOENT, "ENOENT");
    check(g.mkdir("/d") == 0, "mkdir");
    check(g.mkdir("/d") == -1 && g.err() == EEXIST, "EEXIST");
    int fd = g.open("/d/f", O_CREAT | O_RDWR);
    check(fd == 3, "lowest free fd is 3");
    check(g.write(fd, "hello") == 5, "write");
    check(g.lseek(fd, 0, SEEK_SET) == 0, "lseek");
    check(g.read_text(fd, 3) == "hel", "read");
    check(g.lseek(fd, 10, SEEK_SET) == 10 && g.write(fd, "!") == 1, "write past end");
    check(g.fstat(fd, st) == 0 && st.size == 11, "size with hole");
    int fd2 = g.open("/d/f", O_RDONLY);
    check(fd2 == 4, "next fd");
    check(g.close(fd) == 0, "close");
    check(g.open("/d/g", O_CREAT | O_WRONLY) == 3, "fd reuse");
    check(g.close(99) == -1 && g.err() == EBADF, "EBADF");
    check(g.open("/d", O_WRONLY) == -1 && g.err() == EISDIR, "EISDIR");
    check(g.open("/d/f/x", O_RDONLY) == -1 && g.err() == ENOTDIR, "ENOTDIR");
    check(g.open("/d/f", O_CREAT | O_EXCL | O_WRONLY) == -1 && g.err() == EEXIST, "O_EXCL");
    check(g.link("/d/f", "/d/h") == 0 && g.stat("/d/h", st) == 0 && st.nlink == 2, "hard link nlink");
    check(g.unlink("/d/f") == 0 && g.stat("/d/h", st) == 0 && st.nlink == 1, "unlink keeps other name");
    check(g.read_text(fd2, 5) == "hello", "unlinked file still readable while open");
    check(g.symlink("h", "/d/s") == 0, "symlink");
    std::string target;
    check(g.readlink("/d/s", target) == 1 && target == "h", "readlink");
    check(g.lstat("/d/s", st) == 0 && st.kind == 2, "lstat sees the link");
    check(g.stat("/d/s", st) == 0 && st.kind == 0, "stat follows the link");
    check(g.symlink("/loop2", "/loop1") == 0 && g.symlink("/loop1", "/loop2") == 0, "loop links");
    check(g.open("/loop1", O_RDONLY) == -1 && g.err() == ELOOP, "ELOOP");
    check(g.rmdir("/d") == -1 && g.err() == ENOTEMPTY, "ENOTEMPTY");
    check(g.stat("/", st) == 0 && st.nlink == 3, "root nlink counts /d");
    int dir = g.open("/d", O_RDONLY | O_DIRECTORY);
    std::vector<std::string> names;
    check(g.getdents(dir, names) >= 0, "getdents");
    check(std::set<std::string>(names.begin(), names.end()) == std::set<std::string>{"g", "h", "s"},
          "directory listing");
    std::array<int, 2> p{};
    check(g.pipe(p) == 0, "pipe");
    check(g.write(p[1], "xy") == 2 && g.read_text(p[0], 8) == "xy", "pipe FIFO");
    check(g.lseek(p[0], 0, SEEK_SET) == -1 && g.err() == ESPIPE, "ESPIPE");
    g.close(p[0]);
    check(g.write(p[1], "z") == -1 && g.err() == EPIPE, "EPIPE");
    int d = g.dup(fd2);
    check(d >= 0 && g.lseek(fd2, 0, SEEK_CUR) == g.lseek(d, 0, SEEK_CUR), "dup shares the offset");
    return 0;
  });
  check(r.outcome == Outcome::exited, "run ended with " + std::string(outcome_name(r.outcome)) + " " + r.detail);
  check.note = std::to_string(check.count) + " assertions";
  check(check.count >= 25, "fewer than 25 assertions");
}

void record_replay(Check& check) {
  auto box = fresh_dir("box");
  const auto& p = program("hostfiles");
  Config rec_cfg = p.config;
  rec_cfg.sandbox = box;
  auto rec = run_once(p.main, rec_cfg, ChoiceSource::explorer({}));
  check(rec.outcome == Outcome::exited, "recording failed: " + rec.detail);
  check(rec.trace && rec.trace->records.size() >= 10, "fewer than 10 recorded host interactions");
  check(rec.host_calls > 0, "recording made no host calls");
  fs::remove_all(box);
  if (!rec.trace) return;

  auto file = fresh_dir("trace") / "t.bin";
  rec.trace->save(file);
  auto loaded = SyscallTrace::load(file);
  check(loaded == *rec.trace && loaded.encode() == rec.trace->encode(), "trace save/load not bit-exact");
  fs::remove_all(file.parent_path());

  Config rep_cfg = p.config;
  rep_cfg.fs = FsProvider::replay;
  rep_cfg.host_hook = false;
  rep_cfg.replay_trace = std::make_shared<SyscallTrace>(loaded);
  auto rep = run_once(p.main, rep_cfg, ChoiceSource::explorer({}));
  check(rep.outcome == Outcome::exited, "replay failed: " + rep.detail);
  check(rep.events == rec.events, "replayed event log differs");
  check(rep.host_calls == 0, "replay touched the host");

  auto altered = run_once(program("hostfiles_altered").main, rep_cfg, ChoiceSource::explorer({}));
  check(altered.diverged(), "altered program did not diverge");
  check.note = std::to_string(rec.trace->records.size()) + " records, 0 host calls on replay";
}

void stub(Check& check) {
  const Sys file_calls[] = {Sys::openat,  Sys::close,     Sys::read,       Sys::write,    Sys::lseek,
                            Sys::pipe,    Sys::dup,       Sys::dup2,       Sys::fstat,    Sys::fstatat,
                            Sys::mkdirat, Sys::unlinkat,  Sys::linkat,     Sys::symlinkat, Sys::readlinkat,
                            Sys::getdents, Sys::socket,   Sys::socketpair, Sys::bind,     Sys::listen,
                            Sys::connect, Sys::accept};
  Config cfg;
  cfg.fs = FsProvider::none;
  for (auto s : file_calls) {
    std::vector<Value> args;
    for (auto k : sys_signature(s)) {
      switch (k) {
        case ArgKind::integer: args.emplace_back(std::int64_t{0}); break;
        case ArgKind::bytes: args.emplace_back(to_bytes("x")); break;
        case ArgKind::path: args.emplace_back(Path{"/x"}); break;
        case ArgKind::fd: args.emplace_back(Fd{3}); break;
      }
    }
    auto r = run_once([&](Guest& g) { return static_cast<int>(g.syscall(s, args).value); }, cfg,
                      ChoiceSource::explorer({}));
    std::string name(sys_name(s));
    check(r.fault == FaultKind::unsupported_syscall && r.detail.find(name) != std::string::npos,
          name + " did not raise unsupported-syscall naming it");
  }
  check.note = std::to_string(std::size(file_calls)) + " file syscalls";
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {"determinism", 30, determinism},   {"isolation", 5, isolation},
      {"interleavings", 10, interleavings}, {"race-detection", 10, race},
      {"deadlock-detection", 10, deadlock}, {"fair-termination", 20, fairness},
      {"allocation-failures", 5, allocation}, {"clock", 5, clock_rules},
      {"vfs-semantics", 5, vfs_semantics}, {"record-replay", 10, record_replay},
      {"stub-unsupported", 2, stub},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Check check;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      std::ostringstream os;
      os << "took " << secs << "s, limit " << c.limit_s << "s";
      check.failures.push_back(os.str());
    }
    bool ok = check.failures.empty();
    if (!ok) ++failed;
    std::printf("%s %-22s %6.2fs  %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), secs, check.note.c_str());
    for (const auto& f : check.failures) std::printf("     - %s\n", f.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

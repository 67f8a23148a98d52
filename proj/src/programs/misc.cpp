#include <fcntl.h>
#include <time.h>

#include <cerrno>

#include "detos/host_hook.hpp"
#include "detos/programs.hpp"

namespace detos {

GuestMain guarded_allocs_program(int count) {
  return [count](Guest& g) {
    std::vector<std::uint64_t> held;
    std::string report;
    for (int i = 0; i < count; ++i) {
      auto id = g.alloc(64);
      if (id == 0) {
        g.assert_that(g.err() == ENOMEM, "failed allocation sets ENOMEM");
        report += "-";
      } else {
        held.push_back(id);
        report += "+";
      }
    }
    for (auto id : held) g.free(id);
    g.write(1, "allocations " + report + "\n");
    return 0;
  };
}

namespace {

int alloc_unchecked(Guest& g) {
  auto id = g.alloc_checked(128);
  g.free(id);
  return 0;
}

int double_free(Guest& g) {
  auto id = g.alloc(8);
  g.free(id);
  g.free(id);
  return 0;
}

int leak(Guest& g) {
  g.alloc(32);
  auto kept = g.alloc(16);
  g.free(g.alloc(8));
  (void)kept;
  return 0;
}

int clock_ticks(Guest& g) {
  auto t0 = g.clock_gettime(CLOCK_MONOTONIC);
  auto t1 = g.clock_gettime(CLOCK_MONOTONIC);
  auto t2 = g.clock_gettime(CLOCK_MONOTONIC);
  g.assert_that(t0 <= t1 && t1 <= t2, "monotonic clock went backwards");
  auto wall = g.gettimeofday();
  g.write(1, "deltas " + std::to_string(t1 - t0) + " " + std::to_string(t2 - t1) + " wall_us " +
                 std::to_string(wall) + "\n");
  return 0;
}

// Finds the one key the input enumeration must reach.
int input_key(Guest& g) {
  auto key = g.input("key", 2);
  g.assert_that(!(key[0] == 1 && key[1] == 1), "secret key accepted");
  return 0;
}

// Host file traffic through the proxy: sixteen host operations.
int host_files_at(Guest& g, const std::string& name) {
  g.mkdir("/work");
  int fd = g.open("/work/" + name, O_CREAT | O_RDWR | O_TRUNC);
  g.assert_that(fd >= 0, "open in the sandbox");
  g.write(fd, "recorded bytes\n");
  g.lseek(fd, 0, SEEK_SET);
  auto back = g.read_text(fd, 64);
  FileStat st;
  g.fstat(fd, st);
  g.close(fd);
  g.link("/work/" + name, "/work/copy");
  g.symlink(name, "/work/alias");
  std::string target;
  g.readlink("/work/alias", target);
  g.stat("/work/copy", st);
  g.write(1, "read " + std::to_string(back.size()) + " bytes, nlink " + std::to_string(st.nlink) + ", alias -> " +
                 target + "\n");
  auto t = g.clock_gettime(CLOCK_MONOTONIC);
  g.assert_that(t > 0, "host monotonic clock");
  g.unlink("/work/alias");
  g.unlink("/work/copy");
  g.unlink("/work/" + name);
  g.rmdir("/work");
  return 0;
}

// Reads host time behind the kernel's back and publishes it.
int host_clock(Guest& g) {
  auto r = g.kernel().host().call(SyscallRequest{Sys::clock_gettime, {std::int64_t{CLOCK_REALTIME}}});
  g.write(1, "host time " + std::to_string(r.value) + "\n");
  return 0;
}

int escape(Guest& g) {
  int fd = g.open("/../../etc/passwd", O_RDONLY);
  g.write(1, fd >= 0 ? "escaped\n" : "stayed inside\n");
  return 0;
}

int interval_timer(Guest& g) {
  auto r = g.syscall(Sys::setitimer, {std::int64_t{0}, std::int64_t{1000}});
  g.assert_that(r.err == ENOSYS, "interval timers are not simulated");
  return 0;
}

}  // namespace

void register_misc_programs(ProgramRegistry& r) {
  Config inject;
  inject.inject_alloc_faults = true;
  r.add({"alloc3", "three allocations that handle failure", guarded_allocs_program(3), inject});
  r.add({"alloc_unchecked", "an allocation whose failure is not handled", alloc_unchecked, inject});
  r.add({"double_free", "frees one allocation twice", double_free, {}});
  r.add({"leak", "exits with two live allocations", leak, {}});
  r.add({"clock_ticks", "three monotonic reads and one wall read", clock_ticks, {}});
  Config enumerate;
  enumerate.input_policy = InputPolicy::enumerate;
  r.add({"input_key", "asserts a two-byte input is not the secret", input_key, enumerate});

  Config proxy;
  proxy.fs = FsProvider::proxy;
  proxy.host_hook = true;
  r.add({"hostfiles", "host file operations in the sandbox", [](Guest& g) { return host_files_at(g, "a.txt"); },
         proxy});
  r.add({"hostfiles_altered", "hostfiles with a different file name",
         [](Guest& g) { return host_files_at(g, "b.txt"); }, proxy});
  r.add({"escape", "opens a path above the root", escape, proxy});
  Config hook;
  hook.host_hook = true;
  r.add({"hostclock", "reads host time directly", host_clock, hook});
  r.add({"interval_timer", "arms an interval timer", interval_timer, {}});
}

const ProgramRegistry& builtin_programs() {
  static const ProgramRegistry registry = [] {
    ProgramRegistry r;
    register_thread_programs(r);
    register_file_programs(r);
    register_misc_programs(r);
    return r;
  }();
  return registry;
}

}  // namespace detos

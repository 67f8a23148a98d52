#include "detos/clock.hpp"

#include <cerrno>
#include <ctime>

#include "detos/kernel.hpp"

namespace detos {

VirtualClock::VirtualClock(Kernel& kernel, ClockConfig cfg)
    : kernel_(kernel), cfg_(cfg), wall_offset_(cfg.epoch_ns) {}

bool VirtualClock::implements(Sys s) const {
  switch (s) {
    case Sys::clock_gettime:
    case Sys::clock_settime:
    case Sys::gettimeofday:
    case Sys::settimeofday:
    case Sys::setitimer:
      return true;
    default:
      return false;
  }
}

void VirtualClock::advance() {
  switch (cfg_.mode) {
    case ClockMode::fixed_tick:
      if (kernel_.choose(2, "clock") == 1) monotonic_ += cfg_.quantum_ns;
      break;
    case ClockMode::indeterminate_shift:
      monotonic_ += cfg_.quantum_ns * kernel_.choose(cfg_.max_steps + 1, "clock");
      break;
    case ClockMode::off:
      break;
  }
}

std::int64_t VirtualClock::get(int which) {
  if (which != CLOCK_REALTIME && which != CLOCK_MONOTONIC) return -1;
  advance();
  return which == CLOCK_MONOTONIC ? monotonic_ : monotonic_ + wall_offset_;
}

int VirtualClock::set(int which, std::int64_t ns) {
  if (which != CLOCK_REALTIME) return EINVAL;
  wall_offset_ = ns - monotonic_;
  return 0;
}

SyscallResult VirtualClock::handle(const SyscallRequest& req) {
  auto int_arg = [&](std::size_t i) { return std::get<std::int64_t>(req.args[i]); };
  switch (req.name) {
    case Sys::clock_gettime: {
      auto v = get(static_cast<int>(int_arg(0)));
      return v < 0 ? SyscallResult::fail(EINVAL) : SyscallResult::ok(v);
    }
    case Sys::clock_settime: {
      int err = set(static_cast<int>(int_arg(0)), int_arg(1));
      return err ? SyscallResult::fail(err) : SyscallResult::ok(0);
    }
    case Sys::gettimeofday:
      return SyscallResult::ok(get(CLOCK_REALTIME) / 1000);
    case Sys::settimeofday:
      set(CLOCK_REALTIME, int_arg(0) * 1000);
      return SyscallResult::ok(0);
    case Sys::setitimer:
      // Interval timers are not simulated.
      return SyscallResult::fail(ENOSYS);
    default:
      return SyscallResult::fail(ENOSYS);
  }
}

}  // namespace detos

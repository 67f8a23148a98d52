#pragma once

#include <cstdint>

#include "detos/component.hpp"
#include "detos/config.hpp"

namespace detos {

/// Simulated monotonic and wall clocks. Time only moves when observed:
///  - fixed_tick: each read chooses between no tick (0) and one quantum (1);
///  - indeterminate_shift: each read advances by k quanta, k chosen from
///    0..max_steps.
/// Wall time is monotonic time plus an offset that clock_settime adjusts.
class VirtualClock : public Component {
 public:
  VirtualClock(Kernel& kernel, ClockConfig cfg);

  std::string name() const override { return "clock"; }
  bool implements(Sys s) const override;
  SyscallResult handle(const SyscallRequest& req) override;

  // `which` uses the host CLOCK_REALTIME / CLOCK_MONOTONIC numbering.
  // Returns -1 for unknown clocks.
  std::int64_t get(int which);
  // Only the wall clock can be set; returns an errno value or 0.
  int set(int which, std::int64_t ns);

  std::int64_t monotonic_ns() const noexcept { return monotonic_; }
  std::int64_t wall_offset_ns() const noexcept { return wall_offset_; }

 private:
  void advance();

  Kernel& kernel_;
  ClockConfig cfg_;
  std::int64_t monotonic_ = 0;
  std::int64_t wall_offset_;
};

}  // namespace detos

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "detos/codec.hpp"
#include "detos/fault.hpp"
#include "detos/input_store.hpp"

namespace detos {

class SyscallTrace;

enum class SchedulerKind { null, sync, async_safety, async_fair };
enum class FsProvider { vfs, proxy, replay, none };
enum class ClockMode { fixed_tick, indeterminate_shift, off };

std::string_view scheduler_name(SchedulerKind k);
std::string_view fs_provider_name(FsProvider p);
std::string_view clock_mode_name(ClockMode m);

// 2000-01-01T00:00:00Z.
inline constexpr std::int64_t kDefaultEpochNs = 946'684'800LL * 1'000'000'000LL;

struct ClockConfig {
  ClockMode mode = ClockMode::fixed_tick;
  std::int64_t quantum_ns = 1'000'000;
  std::uint32_t max_steps = 3;
  std::int64_t epoch_ns = kDefaultEpochNs;
};

/// Everything that determines a kernel instance. Two boots from equal
/// configurations are indistinguishable.
struct Config {
  SchedulerKind scheduler = SchedulerKind::async_safety;
  FsProvider fs = FsProvider::vfs;
  ClockConfig clock;
  FaultPolicy faults;
  bool inject_alloc_faults = false;

  InputPolicy input_policy = InputPolicy::strict;
  Bytes input_alphabet{0, 1};

  std::uint32_t fair_bound = 8;
  std::size_t max_depth = 10'000;
  std::size_t max_tasks = 64;
  std::size_t stack_bytes = 256 * 1024;

  // Re-check vfs link accounting after every mutating call.
  bool vfs_checks = false;

  bool host_hook = false;
  std::optional<std::filesystem::path> sandbox;  // proxy root
  std::optional<std::filesystem::path> trace;    // replay input
  std::shared_ptr<const SyscallTrace> replay_trace;  // in-memory alternative to `trace`
  std::optional<std::filesystem::path> preload;

  // Digest of the settings that shape guest-visible behaviour, stored in
  // trace headers. Excludes the fs provider and paths.
  std::uint64_t behaviour_digest() const;
};

// Applies a `key = value` setting:
//   scheduler = null|sync|async|fair      fs = vfs|proxy|replay|none
//   clock.mode = tick|shift|off           clock.quantum_ns, clock.max_steps
//   fault.<kind> = report|ignore          inject_alloc_faults = true|false
//   fair_bound, max_depth, max_tasks      input_policy = strict|zero|enumerate
//   host_hook = true|false                sandbox, trace, preload = <path>
// Throws ConfigError for unknown keys or values.
void apply_setting(Config& cfg, std::string_view key, std::string_view value);

}  // namespace detos

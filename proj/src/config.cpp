#include "detos/config.hpp"

#include <charconv>

#include "detos/error.hpp"

namespace detos {

std::string_view scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::null: return "null";
    case SchedulerKind::sync: return "sync";
    case SchedulerKind::async_safety: return "async";
    case SchedulerKind::async_fair: return "fair";
  }
  return "?";
}

std::string_view fs_provider_name(FsProvider p) {
  switch (p) {
    case FsProvider::vfs: return "vfs";
    case FsProvider::proxy: return "proxy";
    case FsProvider::replay: return "replay";
    case FsProvider::none: return "none";
  }
  return "?";
}

std::string_view clock_mode_name(ClockMode m) {
  switch (m) {
    case ClockMode::fixed_tick: return "tick";
    case ClockMode::indeterminate_shift: return "shift";
    case ClockMode::off: return "off";
  }
  return "?";
}

std::uint64_t Config::behaviour_digest() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(scheduler));
  w.u8(static_cast<std::uint8_t>(clock.mode));
  w.i64(clock.quantum_ns);
  w.u32(clock.max_steps);
  w.i64(clock.epoch_ns);
  w.u8(inject_alloc_faults);
  w.u8(static_cast<std::uint8_t>(input_policy));
  w.blob(input_alphabet);
  w.u32(fair_bound);
  return digest_of(w.bytes());
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || p != value.data() + value.size())
    throw ConfigError("setting '" + std::string(key) + "': not a number: '" + std::string(value) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("setting '" + std::string(key) + "': expected true|false, got '" + std::string(value) + "'");
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("setting '" + std::string(key) + "': unknown value '" + std::string(value) + "'");
}

}  // namespace

void apply_setting(Config& cfg, std::string_view key, std::string_view value) {
  if (key == "scheduler") {
    if (value == "null") cfg.scheduler = SchedulerKind::null;
    else if (value == "sync") cfg.scheduler = SchedulerKind::sync;
    else if (value == "async" || value == "async-safety") cfg.scheduler = SchedulerKind::async_safety;
    else if (value == "fair" || value == "async-fair") cfg.scheduler = SchedulerKind::async_fair;
    else bad_value(key, value);
  } else if (key == "fs") {
    if (value == "vfs") cfg.fs = FsProvider::vfs;
    else if (value == "proxy") cfg.fs = FsProvider::proxy;
    else if (value == "replay") cfg.fs = FsProvider::replay;
    else if (value == "none") cfg.fs = FsProvider::none;
    else bad_value(key, value);
  } else if (key == "clock.mode") {
    if (value == "tick" || value == "fixed") cfg.clock.mode = ClockMode::fixed_tick;
    else if (value == "shift") cfg.clock.mode = ClockMode::indeterminate_shift;
    else if (value == "off") cfg.clock.mode = ClockMode::off;
    else bad_value(key, value);
  } else if (key == "clock.quantum_ns") {
    cfg.clock.quantum_ns = parse_number<std::int64_t>(key, value);
    if (cfg.clock.quantum_ns <= 0) throw ConfigError("clock.quantum_ns must be positive");
  } else if (key == "clock.max_steps") {
    cfg.clock.max_steps = parse_number<std::uint32_t>(key, value);
  } else if (key.substr(0, 6) == "fault.") {
    auto kind = fault_from_name(key.substr(6));
    if (!kind) throw ConfigError("unknown fault kind '" + std::string(key.substr(6)) + "'");
    if (value == "report") cfg.faults.set(*kind, FaultAction::report);
    else if (value == "ignore") cfg.faults.set(*kind, FaultAction::ignore);
    else bad_value(key, value);
  } else if (key == "inject_alloc_faults") {
    cfg.inject_alloc_faults = parse_bool(key, value);
  } else if (key == "fair_bound") {
    cfg.fair_bound = parse_number<std::uint32_t>(key, value);
    if (cfg.fair_bound == 0) throw ConfigError("fair_bound must be positive");
  } else if (key == "max_depth") {
    cfg.max_depth = parse_number<std::size_t>(key, value);
  } else if (key == "max_tasks") {
    cfg.max_tasks = parse_number<std::size_t>(key, value);
  } else if (key == "input_policy") {
    if (value == "strict") cfg.input_policy = InputPolicy::strict;
    else if (value == "zero") cfg.input_policy = InputPolicy::zero_fill;
    else if (value == "enumerate") cfg.input_policy = InputPolicy::enumerate;
    else bad_value(key, value);
  } else if (key == "host_hook") {
    cfg.host_hook = parse_bool(key, value);
  } else if (key == "sandbox") {
    cfg.sandbox = std::filesystem::path(value);
  } else if (key == "trace") {
    cfg.trace = std::filesystem::path(value);
  } else if (key == "preload") {
    cfg.preload = std::filesystem::path(value);
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

}  // namespace detos

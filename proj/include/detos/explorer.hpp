#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "detos/choice.hpp"
#include "detos/config.hpp"
#include "detos/event_log.hpp"
#include "detos/fault.hpp"
#include "detos/input_store.hpp"
#include "detos/kernel.hpp"

namespace detos {

struct Verdict {
  FaultKind kind = FaultKind::assertion;
  std::string detail;
  ChoiceLog choices;
  EventLog events;
  bool confirmed = false;  // a scripted replay reproduced kind and EventLog

  // `FAULT kind program choices=N`
  std::string summary(std::string_view program) const;
};

struct Budget {
  std::uint64_t max_executions = 100000;
  std::size_t max_depth = 10000;
};

struct ExploreOptions {
  SiblingOrder order = SiblingOrder::ascending;
  unsigned workers = 1;
  bool confirm_verdicts = true;
  // Called for every execution, serialised under the explorer's lock.
  std::function<void(const RunResult&)> on_execution;
};

struct ExplorationResult {
  std::uint64_t executions = 0;
  std::uint64_t distinct_event_logs = 0;
  std::uint64_t depth_bound_hits = 0;
  std::uint64_t halted = 0;
  std::uint64_t errors = 0;  // executions where guest code threw
  std::vector<Verdict> verdicts;  // sorted by choice log
  bool budget_exhausted = false;

  bool complete() const noexcept { return !budget_exhausted; }
};

// One execution under an explicit choice source.
RunResult run_once(const GuestMain& program, const Config& cfg, ChoiceSource source, const InputStore& inputs = {});

/// Stateless depth-first enumeration of the choice tree: every execution is
/// a fresh boot replaying a prefix and extending it with default choices.
/// Throws ConfigError for an invalid configuration.
ExplorationResult explore(const GuestMain& program, Config cfg, Budget budget = {}, const InputStore& inputs = {},
                          const ExploreOptions& options = {});

// Scripted re-execution of `choices`. Throws DivergenceError if the program
// no longer follows the log.
RunResult replay(const GuestMain& program, const Config& cfg, const ChoiceLog& choices,
                 const InputStore& inputs = {});

// Runs the program `runs` times on one choice log and compares EventLogs
// byte for byte. Throws std::invalid_argument when runs < 2.
bool check_determinism(const GuestMain& program, const Config& cfg, int runs, const InputStore& inputs = {});

}  // namespace detos

#include "detos/explorer.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "detos/error.hpp"

namespace detos {

std::string Verdict::summary(std::string_view program) const {
  return "FAULT " + std::string(fault_name(kind)) + " " + std::string(program) +
         " choices=" + std::to_string(choices.size());
}

RunResult run_once(const GuestMain& program, const Config& cfg, ChoiceSource source, const InputStore& inputs) {
  auto kernel = Kernel::boot(cfg, std::move(source), inputs);
  return kernel->run(program);
}

RunResult replay(const GuestMain& program, const Config& cfg, const ChoiceLog& choices, const InputStore& inputs) {
  auto r = run_once(program, cfg, ChoiceSource::scripted(choices), inputs);
  if (r.diverged()) throw DivergenceError(r.detail);
  return r;
}

bool check_determinism(const GuestMain& program, const Config& cfg, int runs, const InputStore& inputs) {
  if (runs < 2) throw std::invalid_argument("check_determinism needs at least 2 runs");
  auto first = run_once(program, cfg, ChoiceSource::explorer({}), inputs);
  auto reference = first.events.to_text();
  for (int i = 1; i < runs; ++i) {
    auto again = run_once(program, cfg, ChoiceSource::scripted(first.choices), inputs);
    if (again.events.to_text() != reference) return false;
  }
  return true;
}

namespace {

std::uint32_t default_choice(std::uint32_t arity, SiblingOrder order) {
  return order == SiblingOrder::ascending ? 0 : arity - 1;
}

// Unexplored siblings of every choice past the replayed prefix, pushed so
// that the deepest one, in sibling order, is popped first.
void push_children(std::vector<ChoiceLog>& stack, const ChoiceLog& log, std::size_t prefix, SiblingOrder order) {
  for (std::size_t i = prefix; i < log.size(); ++i) {
    auto arity = log[i].arity;
    auto base = log.prefix(i);
    auto skip = default_choice(arity, order);
    auto push = [&](std::uint32_t j) {
      if (j == skip) return;
      auto child = base;
      child.append({arity, j});
      stack.push_back(std::move(child));
    };
    if (order == SiblingOrder::ascending)
      for (std::uint32_t j = arity; j-- > 0;) push(j);
    else
      for (std::uint32_t j = 0; j < arity; ++j) push(j);
  }
}

}  // namespace

ExplorationResult explore(const GuestMain& program, Config cfg, Budget budget, const InputStore& inputs,
                          const ExploreOptions& options) {
  cfg.max_depth = budget.max_depth;
  Kernel::boot(cfg);  // validates the configuration up front

  ExplorationResult result;
  std::unordered_set<std::uint64_t> logs_seen;
  std::vector<ChoiceLog> stack{ChoiceLog{}};
  std::mutex mu;
  std::condition_variable cv;
  unsigned in_flight = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    std::unique_lock lock(mu);
    while (true) {
      cv.wait(lock, [&] { return failure || !stack.empty() || in_flight == 0; });
      if (failure || stack.empty()) return;
      if (result.executions >= budget.max_executions) {
        result.budget_exhausted = true;
        cv.notify_all();
        return;
      }
      auto prefix = std::move(stack.back());
      stack.pop_back();
      ++result.executions;
      ++in_flight;
      lock.unlock();

      RunResult r;
      std::optional<Verdict> verdict;
      try {
        r = run_once(program, cfg, ChoiceSource::explorer(prefix, options.order), inputs);
        if (r.is_verdict()) {
          verdict = Verdict{*r.fault, r.detail, r.choices, r.events, false};
          if (options.confirm_verdicts) {
            auto again = run_once(program, cfg, ChoiceSource::scripted(r.choices), inputs);
            verdict->confirmed = again.fault == r.fault && again.events == r.events;
          }
        }
      } catch (...) {
        lock.lock();
        --in_flight;
        failure = std::current_exception();
        cv.notify_all();
        return;
      }

      lock.lock();
      --in_flight;
      if (logs_seen.insert(r.events.digest()).second) ++result.distinct_event_logs;
      if (r.outcome == Outcome::depth_bound) ++result.depth_bound_hits;
      if (r.outcome == Outcome::halted) ++result.halted;
      if (r.outcome == Outcome::error) ++result.errors;
      if (verdict) result.verdicts.push_back(std::move(*verdict));
      if (options.on_execution) options.on_execution(r);
      push_children(stack, r.choices, prefix.size(), options.order);
      cv.notify_all();
    }
  };

  unsigned n = std::max(1u, options.workers);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (!stack.empty()) result.budget_exhausted = true;

  std::sort(result.verdicts.begin(), result.verdicts.end(),
            [](const Verdict& a, const Verdict& b) { return a.choices < b.choices; });
  return result;
}

}  // namespace detos

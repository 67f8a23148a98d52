// Brute-force reference models used as expected values by the tests. None of
// them touches the kernel.
#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Every merge of `a` copies of 'A' with `b` copies of 'B'.
inline std::set<std::string> interleavings(int a, int b) {
  std::set<std::string> out;
  std::function<void(std::string, int, int)> go = [&](std::string s, int ra, int rb) {
    if (ra == 0 && rb == 0) {
      out.insert(s);
      return;
    }
    if (ra > 0) go(s + 'A', ra - 1, rb);
    if (rb > 0) go(s + 'B', ra, rb - 1);
  };
  go("", a, b);
  return out;
}

// Final counter values of two tasks doing `x = c; c = x + 1` (two atomic
// steps each) in every interleaving.
inline std::set<int> racy_counter_outcomes() {
  std::set<int> finals;
  for (const auto& order : interleavings(2, 2)) {
    int c = 0;
    int seen[2] = {0, 0};
    int step[2] = {0, 0};
    for (char who : order) {
      int t = who == 'A' ? 0 : 1;
      if (step[t]++ == 0) seen[t] = c;
      else c = seen[t] + 1;
    }
    finals.insert(c);
  }
  return finals;
}

// Outcome strings of k independent allocations, '+' success and '-' failure.
inline std::set<std::string> allocation_outcomes(int k) {
  std::set<std::string> out;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    std::string s;
    for (int i = 0; i < k; ++i) s += (mask >> i) & 1 ? '-' : '+';
    out.insert(s);
  }
  return out;
}

// Leaves of a spinner-vs-setter tree under a bounded-deficit rule: at each
// decision the spinner may keep running unless the setter has been passed
// over `bound` times, in which case the setter is forced.
inline std::uint64_t fair_busywait_leaves(std::uint32_t bound) {
  std::uint64_t leaves = 0;
  std::function<void(std::uint32_t)> go = [&](std::uint32_t passed_over) {
    if (passed_over >= bound) {
      ++leaves;  // forced: setter runs
      return;
    }
    ++leaves;                // setter chosen here
    go(passed_over + 1);     // spinner chosen again
  };
  go(0);
  return leaves;
}

}  // namespace oracle

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "detos/codec.hpp"
#include "detos/task.hpp"

namespace detos {

struct MutexState {
  std::optional<TaskId> owner;
};

struct CondState {
  std::vector<TaskId> waiters;  // in arrival order
};

// Per-execution state behind the guest API.
struct GuestState {
  std::map<TaskId, int> errno_by_task;
  std::vector<MutexState> mutexes;
  std::vector<CondState> conds;
  std::map<std::uint64_t, Bytes> allocations;
  std::uint64_t next_alloc = 1;
  std::map<TaskId, int> exit_values;
  std::map<std::int64_t, std::function<void()>> pending_entries;
  std::int64_t next_entry = 1;
};

}  // namespace detos

#pragma once

#include <atomic>
#include <cstdint>

#include "detos/syscall.hpp"

namespace detos {

/// Gate to the host's system calls. Requests use host values: Fd arguments
/// are host descriptors and Path arguments are host paths. Host-level
/// failures come back as results (value -1, err = host errno).
///
/// Supported: openat, close, read, write, lseek, fstat, fstatat, mkdirat,
/// unlinkat, linkat, symlinkat, readlinkat, clock_gettime, gettimeofday,
/// getpid. Anything else yields ENOSYS.
class HostHook {
 public:
  explicit HostHook(bool enabled = false) : enabled_(enabled) {}

  bool enabled() const noexcept { return enabled_; }

  // Throws ConfigError when the hook is disabled.
  SyscallResult call(const SyscallRequest& request);

  std::uint64_t calls() const noexcept { return calls_; }
  // Host calls performed by every hook in this process.
  static std::uint64_t process_calls() noexcept { return process_calls_.load(); }

 private:
  bool enabled_;
  std::uint64_t calls_ = 0;
  static std::atomic<std::uint64_t> process_calls_;
};

}  // namespace detos

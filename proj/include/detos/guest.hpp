#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detos/codec.hpp"
#include "detos/kernel.hpp"
#include "detos/syscall.hpp"

namespace detos {

/// The POSIX-like surface guest programs are written against.
///
/// File, socket and clock calls go through the kernel's component stack and
/// return -1 with the task's errno set on failure, like their libc namesakes.
/// Threads, locks and allocation are kernel-side bookkeeping driven through
/// the scheduler and the choice operator.
///
/// A Guest is a thin handle; each task gets its own, but all state lives in
/// the kernel, so copies are interchangeable.
class Guest {
 public:
  explicit Guest(Kernel& kernel) : k_(kernel) {}

  Kernel& kernel() noexcept { return k_; }
  int err() const;
  void set_err(int e);

  // Raw entry point; sets errno when the call fails.
  SyscallResult syscall(Sys name, std::vector<Value> args);

  int open(const std::string& path, int flags, int mode = 0644);
  int openat(int dirfd, const std::string& path, int flags, int mode = 0644);
  int close(int fd);
  std::int64_t read(int fd, Bytes& buf, std::size_t count);
  // Reads up to `count` bytes as text; empty on EOF or error.
  std::string read_text(int fd, std::size_t count = 4096);
  std::int64_t write(int fd, std::span<const std::uint8_t> data);
  std::int64_t write(int fd, std::string_view text);
  std::int64_t lseek(int fd, std::int64_t offset, int whence);
  int pipe(std::array<int, 2>& fds);
  int dup(int fd);
  int dup2(int fd, int newfd);
  int fstat(int fd, FileStat& st);
  int stat(const std::string& path, FileStat& st);
  int lstat(const std::string& path, FileStat& st);
  int mkdir(const std::string& path, int mode = 0755);
  int unlink(const std::string& path);
  int rmdir(const std::string& path);
  int link(const std::string& oldpath, const std::string& newpath);
  int symlink(const std::string& target, const std::string& linkpath);
  int readlink(const std::string& path, std::string& target);
  int getdents(int fd, std::vector<std::string>& names);

  int socket();
  int socketpair(std::array<int, 2>& fds);
  int bind(int fd, const std::string& address);
  int listen(int fd, int backlog = 8);
  int connect(int fd, const std::string& address);
  int accept(int fd);

  // Nanoseconds (clock_gettime) or microseconds (gettimeofday); -1 on error.
  std::int64_t clock_gettime(int clock);
  int clock_settime(int clock, std::int64_t ns);
  std::int64_t gettimeofday();
  int settimeofday(std::int64_t us);

  using ThreadMain = std::function<int(Guest&)>;
  // Returns the new task id, or 0 with errno set.
  TaskId thread_create(ThreadMain entry);
  int thread_join(TaskId id, int* exit_value = nullptr);
  void yield();
  TaskId gettid();
  int getpid();
  void interrupt_point();

  int mutex_create();
  // Lock is an interrupt point; contention blocks until the owner unlocks.
  void mutex_lock(int m);
  void mutex_unlock(int m);
  std::optional<TaskId> mutex_owner(int m) const;

  int cond_create();
  void cond_wait(int c, int m);
  void cond_signal(int c);
  void cond_broadcast(int c);

  // Allocation id, or 0 with errno = ENOMEM (injected failure) or EINVAL.
  std::uint64_t alloc(std::size_t size);
  // As alloc, but a failure is a fault rather than a return value.
  std::uint64_t alloc_checked(std::size_t size);
  Bytes* data(std::uint64_t id);
  void free(std::uint64_t id);

  void assert_that(bool condition, std::string_view message);
  [[noreturn]] void exit(int code);

  // Named input from the input store (or enumerated, per the input policy).
  Bytes input(const std::string& label, std::size_t length);

 private:
  void acquire(int m);
  void release(int m);
  MutexState* mutex(int m);
  CondState* cond(int c);
  int stat_call(Sys name, std::vector<Value> args, FileStat& st);

  Kernel& k_;
};

struct Program {
  std::string name;
  std::string summary;
  GuestMain main;
  Config config;  // starting point for runs of this program; flags override
};

// Guest programs selectable by name.
class ProgramRegistry {
 public:
  void add(Program p);
  const Program* find(std::string_view name) const;
  std::vector<std::string> names() const;
  const std::map<std::string, Program, std::less<>>& all() const noexcept { return programs_; }

 private:
  std::map<std::string, Program, std::less<>> programs_;
};

}  // namespace detos

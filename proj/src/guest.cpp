#include "detos/guest.hpp"

#include <fcntl.h>

#include <algorithm>
#include <cerrno>

#include "detos/error.hpp"
#include "detos/scheduler.hpp"

namespace detos {

namespace {

std::string mutex_channel(int m) { return "mutex:" + std::to_string(m); }

}  // namespace

int Guest::err() const {
  auto& by_task = k_.guest().errno_by_task;
  auto it = by_task.find(k_.current_task());
  return it == by_task.end() ? 0 : it->second;
}

void Guest::set_err(int e) { k_.guest().errno_by_task[k_.current_task()] = e; }

SyscallResult Guest::syscall(Sys name, std::vector<Value> args) {
  auto r = k_.dispatch(SyscallRequest{name, std::move(args)});
  if (r.err) set_err(r.err);
  return r;
}

// ---------------------------------------------------------------------------
// files

int Guest::open(const std::string& path, int flags, int mode) { return openat(AT_FDCWD, path, flags, mode); }

int Guest::openat(int dirfd, const std::string& path, int flags, int mode) {
  return static_cast<int>(syscall(Sys::openat, {Fd{dirfd}, Path{path}, std::int64_t{flags}, std::int64_t{mode}}).value);
}

int Guest::close(int fd) { return static_cast<int>(syscall(Sys::close, {Fd{fd}}).value); }

std::int64_t Guest::read(int fd, Bytes& buf, std::size_t count) {
  auto r = syscall(Sys::read, {Fd{fd}, static_cast<std::int64_t>(count)});
  buf = r.out.empty() ? Bytes{} : std::move(r.out.front());
  return r.value;
}

std::string Guest::read_text(int fd, std::size_t count) {
  Bytes buf;
  if (read(fd, buf, count) <= 0) return {};
  return to_string(buf);
}

std::int64_t Guest::write(int fd, std::span<const std::uint8_t> data) {
  return syscall(Sys::write, {Fd{fd}, Bytes(data.begin(), data.end())}).value;
}

std::int64_t Guest::write(int fd, std::string_view text) { return syscall(Sys::write, {Fd{fd}, to_bytes(text)}).value; }

std::int64_t Guest::lseek(int fd, std::int64_t offset, int whence) {
  return syscall(Sys::lseek, {Fd{fd}, offset, std::int64_t{whence}}).value;
}

int Guest::pipe(std::array<int, 2>& fds) {
  auto r = syscall(Sys::pipe, {});
  if (r.err) return -1;
  auto pair = decode_fd_pair(r.out.at(0));
  fds = {pair->first, pair->second};
  return 0;
}

int Guest::dup(int fd) { return static_cast<int>(syscall(Sys::dup, {Fd{fd}}).value); }

int Guest::dup2(int fd, int newfd) { return static_cast<int>(syscall(Sys::dup2, {Fd{fd}, Fd{newfd}}).value); }

int Guest::stat_call(Sys name, std::vector<Value> args, FileStat& st) {
  auto r = syscall(name, std::move(args));
  if (r.err) return -1;
  if (auto decoded = FileStat::decode(r.out.at(0))) st = *decoded;
  return 0;
}

int Guest::fstat(int fd, FileStat& st) { return stat_call(Sys::fstat, {Fd{fd}}, st); }

int Guest::stat(const std::string& path, FileStat& st) {
  return stat_call(Sys::fstatat, {Fd{AT_FDCWD}, Path{path}, std::int64_t{0}}, st);
}

int Guest::lstat(const std::string& path, FileStat& st) {
  return stat_call(Sys::fstatat, {Fd{AT_FDCWD}, Path{path}, std::int64_t{AT_SYMLINK_NOFOLLOW}}, st);
}

int Guest::mkdir(const std::string& path, int mode) {
  return static_cast<int>(syscall(Sys::mkdirat, {Fd{AT_FDCWD}, Path{path}, std::int64_t{mode}}).value);
}

int Guest::unlink(const std::string& path) {
  return static_cast<int>(syscall(Sys::unlinkat, {Fd{AT_FDCWD}, Path{path}, std::int64_t{0}}).value);
}

int Guest::rmdir(const std::string& path) {
  return static_cast<int>(syscall(Sys::unlinkat, {Fd{AT_FDCWD}, Path{path}, std::int64_t{AT_REMOVEDIR}}).value);
}

int Guest::link(const std::string& oldpath, const std::string& newpath) {
  return static_cast<int>(
      syscall(Sys::linkat, {Fd{AT_FDCWD}, Path{oldpath}, Fd{AT_FDCWD}, Path{newpath}, std::int64_t{0}}).value);
}

int Guest::symlink(const std::string& target, const std::string& linkpath) {
  return static_cast<int>(syscall(Sys::symlinkat, {Path{target}, Fd{AT_FDCWD}, Path{linkpath}}).value);
}

int Guest::readlink(const std::string& path, std::string& target) {
  auto r = syscall(Sys::readlinkat, {Fd{AT_FDCWD}, Path{path}});
  if (r.err) return -1;
  target = to_string(r.out.at(0));
  return static_cast<int>(r.value);
}

int Guest::getdents(int fd, std::vector<std::string>& names) {
  auto r = syscall(Sys::getdents, {Fd{fd}});
  if (r.err) return -1;
  names.clear();
  std::string cur;
  for (auto b : r.out.at(0)) {
    if (b == 0) {
      names.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(b));
    }
  }
  return static_cast<int>(names.size());
}

// ---------------------------------------------------------------------------
// sockets

int Guest::socket() { return static_cast<int>(syscall(Sys::socket, {}).value); }

int Guest::socketpair(std::array<int, 2>& fds) {
  auto r = syscall(Sys::socketpair, {});
  if (r.err) return -1;
  auto pair = decode_fd_pair(r.out.at(0));
  fds = {pair->first, pair->second};
  return 0;
}

int Guest::bind(int fd, const std::string& address) {
  return static_cast<int>(syscall(Sys::bind, {Fd{fd}, Path{address}}).value);
}

int Guest::listen(int fd, int backlog) {
  return static_cast<int>(syscall(Sys::listen, {Fd{fd}, std::int64_t{backlog}}).value);
}

int Guest::connect(int fd, const std::string& address) {
  return static_cast<int>(syscall(Sys::connect, {Fd{fd}, Path{address}}).value);
}

int Guest::accept(int fd) { return static_cast<int>(syscall(Sys::accept, {Fd{fd}}).value); }

// ---------------------------------------------------------------------------
// clock

std::int64_t Guest::clock_gettime(int clock) { return syscall(Sys::clock_gettime, {std::int64_t{clock}}).value; }

int Guest::clock_settime(int clock, std::int64_t ns) {
  return static_cast<int>(syscall(Sys::clock_settime, {std::int64_t{clock}, ns}).value);
}

std::int64_t Guest::gettimeofday() { return syscall(Sys::gettimeofday, {}).value; }

int Guest::settimeofday(std::int64_t us) { return static_cast<int>(syscall(Sys::settimeofday, {us}).value); }

// ---------------------------------------------------------------------------
// threads

TaskId Guest::thread_create(ThreadMain entry) {
  auto& gs = k_.guest();
  auto slot = gs.next_entry++;
  Kernel* k = &k_;
  gs.pending_entries[slot] = [k, entry = std::move(entry)] {
    Guest g(*k);
    int rc = entry(g);
    k->guest().exit_values[k->current_task()] = rc;
  };
  auto r = syscall(Sys::thread_create, {slot});
  gs.pending_entries.erase(slot);
  return r.err ? 0 : static_cast<TaskId>(r.value);
}

int Guest::thread_join(TaskId id, int* exit_value) {
  TaskId self = k_.current_task();
  if (id == self) {
    k_.raise_fault(FaultKind::deadlock, "task " + std::to_string(id) + " joins itself");
    set_err(EDEADLK);
    return -1;
  }
  auto& rt = k_.runtime();
  try {
    while (rt.state(id) != TaskState::finished) {
      k_.scheduler().block("join:" + std::to_string(id));
      if (rt.stopping()) return -1;
    }
  } catch (const TaskError&) {
    set_err(ESRCH);
    return -1;
  }
  if (exit_value) {
    auto& values = k_.guest().exit_values;
    auto it = values.find(id);
    *exit_value = it == values.end() ? 0 : it->second;
  }
  return 0;
}

void Guest::yield() { syscall(Sys::sched_yield, {}); }

TaskId Guest::gettid() { return static_cast<TaskId>(syscall(Sys::gettid, {}).value); }

int Guest::getpid() { return static_cast<int>(syscall(Sys::getpid, {}).value); }

void Guest::interrupt_point() { k_.scheduler().interrupt_point(); }

// ---------------------------------------------------------------------------
// mutexes and condition variables

MutexState* Guest::mutex(int m) {
  auto& all = k_.guest().mutexes;
  if (m < 0 || static_cast<std::size_t>(m) >= all.size()) {
    k_.raise_fault(FaultKind::assertion, "unknown mutex " + std::to_string(m));
    return nullptr;
  }
  return &all[m];
}

CondState* Guest::cond(int c) {
  auto& all = k_.guest().conds;
  if (c < 0 || static_cast<std::size_t>(c) >= all.size()) {
    k_.raise_fault(FaultKind::assertion, "unknown condition variable " + std::to_string(c));
    return nullptr;
  }
  return &all[c];
}

int Guest::mutex_create() {
  k_.guest().mutexes.emplace_back();
  return static_cast<int>(k_.guest().mutexes.size() - 1);
}

std::optional<TaskId> Guest::mutex_owner(int m) const {
  const auto& all = k_.guest().mutexes;
  if (m < 0 || static_cast<std::size_t>(m) >= all.size()) return std::nullopt;
  return all[m].owner;
}

void Guest::acquire(int m) {
  TaskId self = k_.current_task();
  while (true) {
    auto* mx = mutex(m);
    if (!mx) return;
    if (!mx->owner) {
      mx->owner = self;
      return;
    }
    if (*mx->owner == self) {
      k_.raise_fault(FaultKind::deadlock, "task " + std::to_string(self) + " relocks mutex " + std::to_string(m));
      return;
    }
    k_.scheduler().block(mutex_channel(m));
    if (k_.runtime().stopping()) return;
  }
}

void Guest::release(int m) {
  auto* mx = mutex(m);
  if (!mx) return;
  TaskId self = k_.current_task();
  if (mx->owner != self) {
    k_.raise_fault(FaultKind::assertion,
                   "task " + std::to_string(self) + " unlocks mutex " + std::to_string(m) + " it does not own");
    return;
  }
  mx->owner.reset();
  k_.scheduler().wake_all(mutex_channel(m));
}

void Guest::mutex_lock(int m) {
  interrupt_point();
  acquire(m);
}

void Guest::mutex_unlock(int m) { release(m); }

int Guest::cond_create() {
  k_.guest().conds.emplace_back();
  return static_cast<int>(k_.guest().conds.size() - 1);
}

void Guest::cond_wait(int c, int m) {
  auto* cv = cond(c);
  auto* mx = mutex(m);
  if (!cv || !mx) return;
  TaskId self = k_.current_task();
  if (mx->owner != self) {
    k_.raise_fault(FaultKind::assertion, "cond_wait without holding mutex " + std::to_string(m));
    return;
  }
  cv->waiters.push_back(self);
  release(m);
  auto waiting = [&] {
    const auto& w = k_.guest().conds[c].waiters;
    return std::find(w.begin(), w.end(), self) != w.end();
  };
  while (waiting()) {
    k_.scheduler().block("cond:" + std::to_string(c));
    if (k_.runtime().stopping()) return;
  }
  acquire(m);
}

void Guest::cond_signal(int c) {
  auto* cv = cond(c);
  if (!cv || cv->waiters.empty()) return;
  std::size_t pick = 0;
  if (cv->waiters.size() > 1) pick = k_.choose(static_cast<std::uint32_t>(cv->waiters.size()), "cond");
  cv = cond(c);
  TaskId woken = cv->waiters.at(pick);
  cv->waiters.erase(cv->waiters.begin() + static_cast<std::ptrdiff_t>(pick));
  k_.scheduler().wake(woken);
}

void Guest::cond_broadcast(int c) {
  auto* cv = cond(c);
  if (!cv) return;
  auto waiters = std::move(cv->waiters);
  cv->waiters.clear();
  for (auto t : waiters) k_.scheduler().wake(t);
}

// ---------------------------------------------------------------------------
// allocation

std::uint64_t Guest::alloc(std::size_t size) {
  if (size == 0) {
    set_err(EINVAL);
    return 0;
  }
  if (k_.config().inject_alloc_faults && k_.choose(2, "alloc") == 1) {
    set_err(ENOMEM);
    return 0;
  }
  auto& gs = k_.guest();
  auto id = gs.next_alloc++;
  gs.allocations[id] = Bytes(size);
  return id;
}

std::uint64_t Guest::alloc_checked(std::size_t size) {
  auto id = alloc(size);
  if (id == 0)
    k_.raise_fault(FaultKind::allocation_failure_unhandled,
                   "allocation of " + std::to_string(size) + " bytes failed and was not handled");
  return id;
}

Bytes* Guest::data(std::uint64_t id) {
  auto& a = k_.guest().allocations;
  auto it = a.find(id);
  return it == a.end() ? nullptr : &it->second;
}

void Guest::free(std::uint64_t id) {
  auto& gs = k_.guest();
  if (gs.allocations.erase(id)) return;
  if (id > 0 && id < gs.next_alloc)
    k_.raise_fault(FaultKind::assertion, "double free of allocation " + std::to_string(id));
  else
    k_.raise_fault(FaultKind::assertion, "free of unknown allocation " + std::to_string(id));
}

// ---------------------------------------------------------------------------

void Guest::assert_that(bool condition, std::string_view message) {
  if (!condition) k_.raise_fault(FaultKind::assertion, std::string(message));
}

void Guest::exit(int code) {
  syscall(Sys::exit, {std::int64_t{code}});
  k_.exit(code);
}

Bytes Guest::input(const std::string& label, std::size_t length) { return k_.indeterminate_bytes(label, length); }

// ---------------------------------------------------------------------------

void ProgramRegistry::add(Program p) {
  auto name = p.name;
  programs_[name] = std::move(p);
}

const Program* ProgramRegistry::find(std::string_view name) const {
  auto it = programs_.find(name);
  return it == programs_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProgramRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : programs_) out.push_back(name);
  return out;
}

}  // namespace detos

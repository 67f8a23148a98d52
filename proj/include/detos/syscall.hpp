#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "detos/codec.hpp"
#include "detos/task.hpp"

namespace detos {

struct Fd {
  int value = -1;
  friend bool operator==(const Fd&, const Fd&) = default;
};

struct Path {
  std::string value;
  friend bool operator==(const Path&, const Path&) = default;
};

// Variant index doubles as the ArgKind tag.
using Value = std::variant<std::int64_t, Bytes, Path, Fd>;

enum class ArgKind : std::uint8_t { integer = 0, bytes = 1, path = 2, fd = 3 };

inline ArgKind kind_of(const Value& v) { return static_cast<ArgKind>(v.index()); }

// The fixed system call list.
enum class Sys : std::uint8_t {
  openat,
  close,
  read,
  write,
  lseek,
  pipe,
  dup,
  dup2,
  fstat,
  fstatat,
  mkdirat,
  unlinkat,
  linkat,
  symlinkat,
  readlinkat,
  getdents,
  socket,
  socketpair,
  bind,
  listen,
  connect,
  accept,
  clock_gettime,
  clock_settime,
  gettimeofday,
  settimeofday,
  setitimer,
  thread_create,
  sched_yield,
  gettid,
  getpid,
  exit,
};

inline constexpr std::size_t kSyscallCount = static_cast<std::size_t>(Sys::exit) + 1;

std::string_view sys_name(Sys s);
std::optional<Sys> sys_from_name(std::string_view name);
std::span<const ArgKind> sys_signature(Sys s);
std::span<const Sys> all_syscalls();

struct SyscallRequest {
  Sys name = Sys::getpid;
  std::vector<Value> args;
  TaskId task = kKernelContext;  // filled in by dispatch
};

struct SyscallResult {
  std::int64_t value = 0;
  int err = 0;
  std::vector<Bytes> out;

  static SyscallResult ok(std::int64_t v = 0) { return {v, 0, {}}; }
  static SyscallResult fail(int e) { return {-1, e, {}}; }

  friend bool operator==(const SyscallResult&, const SyscallResult&) = default;
};

// Name is from the fixed list and argument kinds match the signature table.
bool well_formed(const SyscallRequest& req);

void encode_value(ByteWriter& w, const Value& v);
bool decode_value(ByteReader& r, Value& v);
void encode_args(ByteWriter& w, const std::vector<Value>& args);
void encode_result(ByteWriter& w, const SyscallResult& r);

std::uint64_t args_digest(const SyscallRequest& req);
std::uint64_t result_digest(const SyscallResult& r);

// Human-readable form, e.g. `openat(AT_FDCWD, "/a", 64, 420)`.
std::string describe(Sys name, const std::vector<Value>& args);

// File status as carried in fstat/fstatat out-payloads.
struct FileStat {
  std::uint64_t ino = 0;
  std::uint32_t kind = 0;  // InodeKind numbering
  std::uint32_t mode = 0;
  std::uint64_t nlink = 0;
  std::uint64_t size = 0;

  Bytes encode() const;
  static std::optional<FileStat> decode(std::span<const std::uint8_t> b);
};

Bytes encode_fd_pair(int a, int b);
std::optional<std::pair<int, int>> decode_fd_pair(std::span<const std::uint8_t> b);

}  // namespace detos

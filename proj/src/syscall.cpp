#include "detos/syscall.hpp"

#include <fcntl.h>

#include <array>
#include <sstream>

namespace detos {

namespace {

using K = ArgKind;

struct SysInfo {
  Sys sys;
  std::string_view name;
  std::array<ArgKind, 5> args;
  std::size_t arity;
};

constexpr std::array<SysInfo, kSyscallCount> kTable{{
    {Sys::openat, "openat", {K::fd, K::path, K::integer, K::integer}, 4},
    {Sys::close, "close", {K::fd}, 1},
    {Sys::read, "read", {K::fd, K::integer}, 2},
    {Sys::write, "write", {K::fd, K::bytes}, 2},
    {Sys::lseek, "lseek", {K::fd, K::integer, K::integer}, 3},
    {Sys::pipe, "pipe", {}, 0},
    {Sys::dup, "dup", {K::fd}, 1},
    {Sys::dup2, "dup2", {K::fd, K::fd}, 2},
    {Sys::fstat, "fstat", {K::fd}, 1},
    {Sys::fstatat, "fstatat", {K::fd, K::path, K::integer}, 3},
    {Sys::mkdirat, "mkdirat", {K::fd, K::path, K::integer}, 3},
    {Sys::unlinkat, "unlinkat", {K::fd, K::path, K::integer}, 3},
    {Sys::linkat, "linkat", {K::fd, K::path, K::fd, K::path, K::integer}, 5},
    {Sys::symlinkat, "symlinkat", {K::path, K::fd, K::path}, 3},
    {Sys::readlinkat, "readlinkat", {K::fd, K::path}, 2},
    {Sys::getdents, "getdents", {K::fd}, 1},
    {Sys::socket, "socket", {}, 0},
    {Sys::socketpair, "socketpair", {}, 0},
    {Sys::bind, "bind", {K::fd, K::path}, 2},
    {Sys::listen, "listen", {K::fd, K::integer}, 2},
    {Sys::connect, "connect", {K::fd, K::path}, 2},
    {Sys::accept, "accept", {K::fd}, 1},
    {Sys::clock_gettime, "clock_gettime", {K::integer}, 1},
    {Sys::clock_settime, "clock_settime", {K::integer, K::integer}, 2},
    {Sys::gettimeofday, "gettimeofday", {}, 0},
    {Sys::settimeofday, "settimeofday", {K::integer}, 1},
    {Sys::setitimer, "setitimer", {K::integer, K::integer}, 2},
    {Sys::thread_create, "thread_create", {K::integer}, 1},
    {Sys::sched_yield, "sched_yield", {}, 0},
    {Sys::gettid, "gettid", {}, 0},
    {Sys::getpid, "getpid", {}, 0},
    {Sys::exit, "exit", {K::integer}, 1},
}};

constexpr bool table_is_ordered() {
  for (std::size_t i = 0; i < kTable.size(); ++i)
    if (static_cast<std::size_t>(kTable[i].sys) != i) return false;
  return true;
}
static_assert(table_is_ordered());

constexpr std::array<Sys, kSyscallCount> kAll = [] {
  std::array<Sys, kSyscallCount> out{};
  for (std::size_t i = 0; i < kSyscallCount; ++i) out[i] = static_cast<Sys>(i);
  return out;
}();

}  // namespace

std::string_view sys_name(Sys s) { return kTable[static_cast<std::size_t>(s)].name; }

std::optional<Sys> sys_from_name(std::string_view name) {
  for (const auto& info : kTable)
    if (info.name == name) return info.sys;
  return std::nullopt;
}

std::span<const ArgKind> sys_signature(Sys s) {
  const auto& info = kTable[static_cast<std::size_t>(s)];
  return std::span(info.args.data(), info.arity);
}

std::span<const Sys> all_syscalls() { return kAll; }

bool well_formed(const SyscallRequest& req) {
  if (static_cast<std::size_t>(req.name) >= kSyscallCount) return false;
  auto sig = sys_signature(req.name);
  if (sig.size() != req.args.size()) return false;
  for (std::size_t i = 0; i < sig.size(); ++i)
    if (kind_of(req.args[i]) != sig[i]) return false;
  return true;
}

void encode_value(ByteWriter& w, const Value& v) {
  w.u8(static_cast<std::uint8_t>(v.index()));
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) w.i64(x);
        else if constexpr (std::is_same_v<T, Bytes>) w.blob(x);
        else if constexpr (std::is_same_v<T, Path>) w.blob(x.value);
        else w.i32(x.value);
      },
      v);
}

bool decode_value(ByteReader& r, Value& v) {
  std::uint8_t tag;
  if (!r.u8(tag)) return false;
  switch (static_cast<ArgKind>(tag)) {
    case ArgKind::integer: {
      std::int64_t x;
      if (!r.i64(x)) return false;
      v = x;
      return true;
    }
    case ArgKind::bytes: {
      Bytes b;
      if (!r.blob(b)) return false;
      v = std::move(b);
      return true;
    }
    case ArgKind::path: {
      Bytes b;
      if (!r.blob(b)) return false;
      v = Path{to_string(b)};
      return true;
    }
    case ArgKind::fd: {
      std::int32_t x;
      if (!r.i32(x)) return false;
      v = Fd{x};
      return true;
    }
  }
  return false;
}

void encode_args(ByteWriter& w, const std::vector<Value>& args) {
  w.u8(static_cast<std::uint8_t>(args.size()));
  for (const auto& a : args) encode_value(w, a);
}

void encode_result(ByteWriter& w, const SyscallResult& r) {
  w.i64(r.value);
  w.i32(r.err);
  w.u8(static_cast<std::uint8_t>(r.out.size()));
  for (const auto& o : r.out) w.blob(o);
}

std::uint64_t args_digest(const SyscallRequest& req) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(req.name));
  encode_args(w, req.args);
  return digest_of(w.bytes());
}

std::uint64_t result_digest(const SyscallResult& r) {
  ByteWriter w;
  encode_result(w, r);
  return digest_of(w.bytes());
}

std::string describe(Sys name, const std::vector<Value>& args) {
  std::ostringstream os;
  os << sys_name(name) << '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) os << ", ";
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::int64_t>) {
            os << x;
          } else if constexpr (std::is_same_v<T, Bytes>) {
            os << '<' << x.size() << " bytes>";
          } else if constexpr (std::is_same_v<T, Path>) {
            os << '"' << x.value << '"';
          } else if (x.value == AT_FDCWD) {
            os << "AT_FDCWD";
          } else {
            os << x.value;
          }
        },
        args[i]);
  }
  os << ')';
  return os.str();
}

Bytes FileStat::encode() const {
  ByteWriter w;
  w.u64(ino);
  w.u32(kind);
  w.u32(mode);
  w.u64(nlink);
  w.u64(size);
  return std::move(w).bytes();
}

std::optional<FileStat> FileStat::decode(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  FileStat st;
  if (!r.u64(st.ino) || !r.u32(st.kind) || !r.u32(st.mode) || !r.u64(st.nlink) || !r.u64(st.size))
    return std::nullopt;
  return st;
}

Bytes encode_fd_pair(int a, int b) {
  ByteWriter w;
  w.i32(a);
  w.i32(b);
  return std::move(w).bytes();
}

std::optional<std::pair<int, int>> decode_fd_pair(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  std::int32_t x, y;
  if (!r.i32(x) || !r.i32(y)) return std::nullopt;
  return std::pair{x, y};
}

}  // namespace detos

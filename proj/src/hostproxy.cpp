#include "detos/hostproxy.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "detos/error.hpp"
#include "detos/host_hook.hpp"
#include "detos/kernel.hpp"

namespace detos {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'R', 'C'};

[[noreturn]] void truncated(const std::string& what) { throw TraceError(TraceError::Kind::truncated, what); }
[[noreturn]] void corrupt(const std::string& what) { throw TraceError(TraceError::Kind::corrupt, what); }

Bytes encode_record(const SyscallRecord& rec) {
  ByteWriter w;
  w.u64(rec.seq);
  auto name = sys_name(rec.name);
  w.u8(static_cast<std::uint8_t>(name.size()));
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()));
  encode_args(w, rec.args);
  encode_result(w, rec.result);
  return std::move(w).bytes();
}

SyscallRecord decode_record(std::span<const std::uint8_t> body, std::size_t index) {
  auto where = "record " + std::to_string(index) + ": ";
  ByteReader r(body);
  SyscallRecord rec;
  std::uint8_t name_len = 0;
  Bytes name;
  if (!r.u64(rec.seq) || !r.u8(name_len) || !r.raw(name_len, name)) corrupt(where + "bad header");
  auto sys = sys_from_name(to_string(name));
  if (!sys) corrupt(where + "unknown syscall '" + to_string(name) + "'");
  rec.name = *sys;
  std::uint8_t argc = 0;
  if (!r.u8(argc)) corrupt(where + "missing argument count");
  for (std::uint8_t i = 0; i < argc; ++i) {
    Value v;
    if (!decode_value(r, v)) corrupt(where + "bad argument " + std::to_string(i));
    rec.args.push_back(std::move(v));
  }
  if (!well_formed(SyscallRequest{rec.name, rec.args})) corrupt(where + "arguments do not match " + to_string(name));
  std::uint8_t outc = 0;
  if (!r.i64(rec.result.value) || !r.i32(rec.result.err) || !r.u8(outc)) corrupt(where + "bad result");
  for (std::uint8_t i = 0; i < outc; ++i) {
    Bytes b;
    if (!r.blob(b)) corrupt(where + "bad payload");
    rec.result.out.push_back(std::move(b));
  }
  if (r.remaining() != 0) corrupt(where + "trailing bytes");
  return rec;
}

// Lexically normalised guest path ("/a/b"), or nullopt if ".." climbs above the root.
std::optional<std::string> normalise(const std::string& base, const std::string& path) {
  std::vector<std::string> parts;
  auto feed = [&](const std::string& p) {
    std::size_t i = 0;
    while (i <= p.size()) {
      auto j = p.find('/', i);
      if (j == std::string::npos) j = p.size();
      auto part = p.substr(i, j - i);
      i = j + 1;
      if (part.empty() || part == ".") continue;
      if (part == "..") {
        if (parts.empty()) return false;
        parts.pop_back();
      } else {
        parts.push_back(part);
      }
    }
    return true;
  };
  if (path.empty() || path.front() != '/')
    if (!feed(base)) return std::nullopt;
  if (!feed(path)) return std::nullopt;
  std::string out;
  for (const auto& p : parts) out += "/" + p;
  return out.empty() ? "/" : out;
}

std::string dirname(const std::string& guest_path) {
  auto slash = guest_path.rfind('/');
  return slash == 0 || slash == std::string::npos ? "/" : guest_path.substr(0, slash);
}

}  // namespace

bool proxied_syscall(Sys s) {
  switch (s) {
    case Sys::openat:
    case Sys::close:
    case Sys::read:
    case Sys::write:
    case Sys::lseek:
    case Sys::fstat:
    case Sys::fstatat:
    case Sys::mkdirat:
    case Sys::unlinkat:
    case Sys::linkat:
    case Sys::symlinkat:
    case Sys::readlinkat:
    case Sys::clock_gettime:
    case Sys::gettimeofday:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// trace codec

Bytes SyscallTrace::encode() const {
  ByteWriter w;
  w.u8(version);
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u64(config_digest);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) w.blob(encode_record(rec));
  return std::move(w).bytes();
}

SyscallTrace SyscallTrace::decode(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  SyscallTrace t;
  Bytes magic;
  if (!r.u8(t.version)) truncated("empty trace");
  if (t.version != kVersion)
    throw TraceError(TraceError::Kind::version, "unsupported trace version " + std::to_string(t.version));
  if (!r.raw(4, magic)) truncated("trace header is truncated");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) corrupt("not a trace file (bad magic)");
  std::uint32_t count = 0;
  if (!r.u64(t.config_digest) || !r.u32(count)) truncated("trace header is truncated");
  for (std::uint32_t i = 0; i < count; ++i) {
    Bytes body;
    if (!r.blob(body)) truncated("trace ends inside record " + std::to_string(i));
    t.records.push_back(decode_record(body, i));
    if (i > 0 && t.records[i].seq <= t.records[i - 1].seq) corrupt("record sequence numbers are not increasing");
  }
  if (r.remaining() != 0) corrupt("trailing bytes after the last record");
  return t;
}

void SyscallTrace::save(const std::filesystem::path& path) const {
  auto bytes = encode();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write trace " + path.string());
}

SyscallTrace SyscallTrace::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read trace " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

std::string SyscallTrace::to_text() const {
  std::ostringstream os;
  os << "# trace v" << int(version) << " config " << std::hex << std::setw(16) << std::setfill('0')
     << config_digest << std::dec << " records " << records.size() << '\n';
  for (const auto& rec : records) {
    os << rec.seq << ' ' << describe(rec.name, rec.args) << " = " << rec.result.value;
    if (rec.result.err) os << " errno=" << rec.result.err;
    for (const auto& o : rec.result.out) os << " [" << o.size() << " bytes]";
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// proxy

ProxyComponent::ProxyComponent(Kernel& kernel, HostHook& hook, std::filesystem::path sandbox,
                               std::uint64_t config_digest)
    : kernel_(kernel), hook_(hook), root_(std::filesystem::absolute(sandbox).lexically_normal()) {
  trace_.config_digest = config_digest;
}

ProxyComponent::~ProxyComponent() {
  for (const auto& [guest, open] : fds_) hook_.call(SyscallRequest{Sys::close, {Fd{open.host_fd}}});
}

bool ProxyComponent::implements(Sys s) const { return proxied_syscall(s); }

SyscallResult ProxyComponent::handle(const SyscallRequest& req) {
  auto result = forward(req);
  trace_.records.push_back(SyscallRecord{trace_.records.size(), req.name, req.args, result});
  return result;
}

int ProxyComponent::host_fd(int guest_fd) const {
  auto it = fds_.find(guest_fd);
  return it == fds_.end() ? -1 : it->second.host_fd;
}

std::optional<std::string> ProxyComponent::guest_path(int dirfd, const std::string& path, int& err) {
  std::string base = "/";
  if (dirfd != AT_FDCWD && (path.empty() || path.front() != '/')) {
    auto it = fds_.find(dirfd);
    if (it == fds_.end()) {
      err = EBADF;
      return std::nullopt;
    }
    base = it->second.guest_path;
  }
  if (path.empty()) {
    err = ENOENT;
    return std::nullopt;
  }
  auto p = normalise(base, path);
  if (!p) {
    kernel_.raise_fault(FaultKind::vfs_violation, "path " + path + " escapes the sandbox");
    err = EACCES;
  }
  return p;
}

std::optional<std::string> ProxyComponent::host_path(int dirfd, const std::string& path, int& err) {
  auto g = guest_path(dirfd, path, err);
  if (!g) return std::nullopt;
  return (root_ / g->substr(1)).string();
}

SyscallResult ProxyComponent::forward(const SyscallRequest& req) {
  auto fd = [&](std::size_t i) { return std::get<Fd>(req.args[i]).value; };
  auto path = [&](std::size_t i) -> const std::string& { return std::get<Path>(req.args[i]).value; };
  auto num = [&](std::size_t i) { return std::get<std::int64_t>(req.args[i]); };
  auto host = [&](std::vector<Value> args) { return hook_.call(SyscallRequest{req.name, std::move(args)}); };
  int err = 0;

  switch (req.name) {
    case Sys::openat: {
      auto g = guest_path(fd(0), path(1), err);
      if (!g) return SyscallResult::fail(err);
      auto r = host({Fd{AT_FDCWD}, Path{(root_ / g->substr(1)).string()}, num(2), num(3)});
      if (r.err) return r;
      int guest = 3;
      while (fds_.count(guest)) ++guest;
      fds_[guest] = Open{static_cast<int>(r.value), *g};
      return SyscallResult::ok(guest);
    }
    case Sys::close: {
      int g = fd(0);
      if (g >= 0 && g <= 2) return SyscallResult::ok(0);
      auto it = fds_.find(g);
      if (it == fds_.end()) return SyscallResult::fail(EBADF);
      auto r = host({Fd{it->second.host_fd}});
      fds_.erase(it);
      return r;
    }
    case Sys::read: {
      if (fd(0) == 0) return SyscallResult{0, 0, {Bytes{}}};
      int h = host_fd(fd(0));
      if (h < 0) return SyscallResult::fail(EBADF);
      return host({Fd{h}, num(1)});
    }
    case Sys::write: {
      const auto& data = std::get<Bytes>(req.args[1]);
      if (fd(0) == 1 || fd(0) == 2) {
        kernel_.console_write(fd(0), data);
        return SyscallResult::ok(static_cast<std::int64_t>(data.size()));
      }
      int h = host_fd(fd(0));
      if (h < 0) return SyscallResult::fail(EBADF);
      return host({Fd{h}, data});
    }
    case Sys::lseek: {
      int h = host_fd(fd(0));
      if (h < 0) return SyscallResult::fail(fd(0) >= 0 && fd(0) <= 2 ? ESPIPE : EBADF);
      return host({Fd{h}, num(1), num(2)});
    }
    case Sys::fstat: {
      int h = host_fd(fd(0));
      if (h < 0) return SyscallResult::fail(EBADF);
      return host({Fd{h}});
    }
    case Sys::fstatat: {
      auto p = host_path(fd(0), path(1), err);
      if (!p) return SyscallResult::fail(err);
      return host({Fd{AT_FDCWD}, Path{*p}, num(2)});
    }
    case Sys::mkdirat: {
      auto p = host_path(fd(0), path(1), err);
      if (!p) return SyscallResult::fail(err);
      return host({Fd{AT_FDCWD}, Path{*p}, num(2)});
    }
    case Sys::unlinkat: {
      auto p = host_path(fd(0), path(1), err);
      if (!p) return SyscallResult::fail(err);
      if (*p == root_.string()) return SyscallResult::fail(EBUSY);
      return host({Fd{AT_FDCWD}, Path{*p}, num(2)});
    }
    case Sys::linkat: {
      auto from = host_path(fd(0), path(1), err);
      if (!from) return SyscallResult::fail(err);
      auto to = host_path(fd(2), path(3), err);
      if (!to) return SyscallResult::fail(err);
      return host({Fd{AT_FDCWD}, Path{*from}, Fd{AT_FDCWD}, Path{*to}, num(4)});
    }
    case Sys::symlinkat: {
      auto link = guest_path(fd(1), path(2), err);
      if (!link) return SyscallResult::fail(err);
      const auto& target = path(0);
      if (target.empty()) return SyscallResult::fail(ENOENT);
      if (target.front() == '/' || !normalise(dirname(*link), target)) {
        kernel_.raise_fault(FaultKind::vfs_violation, "symlink target " + target + " leaves the sandbox");
        return SyscallResult::fail(EACCES);
      }
      return host({Path{target}, Fd{AT_FDCWD}, Path{(root_ / link->substr(1)).string()}});
    }
    case Sys::readlinkat: {
      auto p = host_path(fd(0), path(1), err);
      if (!p) return SyscallResult::fail(err);
      return host({Fd{AT_FDCWD}, Path{*p}});
    }
    case Sys::clock_gettime:
      return host({num(0)});
    case Sys::gettimeofday:
      return host({});
    default:
      return SyscallResult::fail(ENOSYS);
  }
}

// ---------------------------------------------------------------------------
// replay

ReplayComponent::ReplayComponent(Kernel& kernel, std::shared_ptr<const SyscallTrace> trace)
    : kernel_(kernel), trace_(std::move(trace)) {}

bool ReplayComponent::implements(Sys s) const { return proxied_syscall(s); }

SyscallResult ReplayComponent::handle(const SyscallRequest& req) {
  auto actual = describe(req.name, req.args);
  if (cursor_ >= trace_->records.size()) {
    kernel_.raise_fault(FaultKind::replay_divergence,
                        "trace exhausted after " + std::to_string(cursor_) + " records; got " + actual);
    return SyscallResult::fail(EIO);
  }
  const auto& rec = trace_->records[cursor_];
  if (rec.name != req.name || rec.args != req.args) {
    kernel_.raise_fault(FaultKind::replay_divergence, "record " + std::to_string(cursor_) + ": expected " +
                                                          describe(rec.name, rec.args) + ", got " + actual);
    return SyscallResult::fail(EIO);
  }
  ++cursor_;
  if (req.name == Sys::write && rec.result.err == 0) {
    int fd = std::get<Fd>(req.args[0]).value;
    if (fd == 1 || fd == 2) kernel_.console_write(fd, std::get<Bytes>(req.args[1]));
  }
  return rec.result;
}

}  // namespace detos

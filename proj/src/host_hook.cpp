#include "detos/host_hook.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <ctime>

#include "detos/error.hpp"

namespace detos {

std::atomic<std::uint64_t> HostHook::process_calls_{0};

namespace {

int fd_arg(const SyscallRequest& r, std::size_t i) { return std::get<Fd>(r.args[i]).value; }
const std::string& path_arg(const SyscallRequest& r, std::size_t i) { return std::get<Path>(r.args[i]).value; }
std::int64_t int_arg(const SyscallRequest& r, std::size_t i) { return std::get<std::int64_t>(r.args[i]); }

SyscallResult from_ret(long ret) { return ret < 0 ? SyscallResult::fail(errno) : SyscallResult::ok(ret); }

std::uint32_t kind_from_mode(mode_t m) {
  if (S_ISDIR(m)) return 1;
  if (S_ISLNK(m)) return 2;
  if (S_ISFIFO(m)) return 3;
  if (S_ISSOCK(m)) return 4;
  return 0;
}

SyscallResult stat_result(int ret, const struct stat& st) {
  if (ret < 0) return SyscallResult::fail(errno);
  FileStat fs;
  fs.ino = st.st_ino;
  fs.kind = kind_from_mode(st.st_mode);
  fs.mode = st.st_mode & 07777;
  fs.nlink = st.st_nlink;
  fs.size = static_cast<std::uint64_t>(st.st_size);
  auto r = SyscallResult::ok(0);
  r.out.push_back(fs.encode());
  return r;
}

}  // namespace

SyscallResult HostHook::call(const SyscallRequest& req) {
  if (!enabled_) throw ConfigError("host syscall hook is disabled");
  if (!well_formed(req)) throw MalformedRequest("malformed host request " + std::string(sys_name(req.name)));
  ++calls_;
  ++process_calls_;
  errno = 0;

  switch (req.name) {
    case Sys::openat:
      return from_ret(::openat(fd_arg(req, 0), path_arg(req, 1).c_str(), static_cast<int>(int_arg(req, 2)) | O_CLOEXEC,
                               static_cast<mode_t>(int_arg(req, 3))));
    case Sys::close:
      return from_ret(::close(fd_arg(req, 0)));
    case Sys::read: {
      auto n = int_arg(req, 1);
      if (n < 0) return SyscallResult::fail(EINVAL);
      Bytes buf(static_cast<std::size_t>(n));
      auto got = ::read(fd_arg(req, 0), buf.data(), buf.size());
      if (got < 0) return SyscallResult::fail(errno);
      buf.resize(static_cast<std::size_t>(got));
      auto r = SyscallResult::ok(got);
      r.out.push_back(std::move(buf));
      return r;
    }
    case Sys::write: {
      const auto& data = std::get<Bytes>(req.args[1]);
      return from_ret(::write(fd_arg(req, 0), data.data(), data.size()));
    }
    case Sys::lseek:
      return from_ret(::lseek(fd_arg(req, 0), int_arg(req, 1), static_cast<int>(int_arg(req, 2))));
    case Sys::fstat: {
      struct stat st {};
      int ret = ::fstat(fd_arg(req, 0), &st);
      return stat_result(ret, st);
    }
    case Sys::fstatat: {
      struct stat st {};
      int ret = ::fstatat(fd_arg(req, 0), path_arg(req, 1).c_str(), &st, static_cast<int>(int_arg(req, 2)));
      return stat_result(ret, st);
    }
    case Sys::mkdirat:
      return from_ret(::mkdirat(fd_arg(req, 0), path_arg(req, 1).c_str(), static_cast<mode_t>(int_arg(req, 2))));
    case Sys::unlinkat:
      return from_ret(::unlinkat(fd_arg(req, 0), path_arg(req, 1).c_str(), static_cast<int>(int_arg(req, 2))));
    case Sys::linkat:
      return from_ret(::linkat(fd_arg(req, 0), path_arg(req, 1).c_str(), fd_arg(req, 2), path_arg(req, 3).c_str(),
                               static_cast<int>(int_arg(req, 4))));
    case Sys::symlinkat:
      return from_ret(::symlinkat(path_arg(req, 0).c_str(), fd_arg(req, 1), path_arg(req, 2).c_str()));
    case Sys::readlinkat: {
      Bytes buf(4096);
      auto got = ::readlinkat(fd_arg(req, 0), path_arg(req, 1).c_str(), reinterpret_cast<char*>(buf.data()),
                              buf.size());
      if (got < 0) return SyscallResult::fail(errno);
      buf.resize(static_cast<std::size_t>(got));
      auto r = SyscallResult::ok(got);
      r.out.push_back(std::move(buf));
      return r;
    }
    case Sys::clock_gettime: {
      timespec ts{};
      if (::clock_gettime(static_cast<clockid_t>(int_arg(req, 0)), &ts) < 0) return SyscallResult::fail(errno);
      return SyscallResult::ok(static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec);
    }
    case Sys::gettimeofday: {
      timeval tv{};
      if (::gettimeofday(&tv, nullptr) < 0) return SyscallResult::fail(errno);
      return SyscallResult::ok(static_cast<std::int64_t>(tv.tv_sec) * 1'000'000 + tv.tv_usec);
    }
    case Sys::getpid:
      return SyscallResult::ok(::getpid());
    default:
      return SyscallResult::fail(ENOSYS);
  }
}

}  // namespace detos

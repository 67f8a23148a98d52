#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "detos/component.hpp"
#include "detos/syscall.hpp"

namespace detos {

class HostHook;

// One guest-visible host interaction: the request as the guest issued it
// and the result as the guest received it.
struct SyscallRecord {
  std::uint64_t seq = 0;
  Sys name = Sys::getpid;
  std::vector<Value> args;
  SyscallResult result;

  friend bool operator==(const SyscallRecord&, const SyscallRecord&) = default;
};

/// Recorded host interactions.
///
/// Binary layout, little-endian:
///   u8 version | "DTRC" | u64 config digest | u32 record count
///   per record: u32 length | u64 seq | u8 name-len, name | u8 argc, args
///               | i64 value | i32 errno | u8 outc, u32-length-prefixed outs
/// Args use the tagged value encoding of the syscall codec.
class SyscallTrace {
 public:
  static constexpr std::uint8_t kVersion = 1;

  std::uint8_t version = kVersion;
  std::uint64_t config_digest = 0;
  std::vector<SyscallRecord> records;

  Bytes encode() const;
  // Throws TraceError; never returns a partial trace.
  static SyscallTrace decode(std::span<const std::uint8_t> data);
  void save(const std::filesystem::path& path) const;
  static SyscallTrace load(const std::filesystem::path& path);
  std::string to_text() const;

  friend bool operator==(const SyscallTrace&, const SyscallTrace&) = default;
};

/// Forwards filesystem and clock syscalls to the host through the host hook
/// and records every interaction.
///
/// Guest paths are rooted at the sandbox directory. A path that escapes it
/// lexically, or an absolute/escaping symlink target, raises `vfs-violation`.
/// Guest descriptors are numbered lowest-free from 3 and translated to host
/// descriptors; 0 reads as empty and 1/2 go to the console.
class ProxyComponent : public Component {
 public:
  ProxyComponent(Kernel& kernel, HostHook& hook, std::filesystem::path sandbox, std::uint64_t config_digest);
  ~ProxyComponent() override;

  std::string name() const override { return "proxy"; }
  bool implements(Sys s) const override;
  SyscallResult handle(const SyscallRequest& req) override;

  const SyscallTrace& trace() const noexcept { return trace_; }

 private:
  struct Open {
    int host_fd;
    std::string guest_path;
  };

  SyscallResult forward(const SyscallRequest& req);
  std::optional<std::string> guest_path(int dirfd, const std::string& path, int& err);
  std::optional<std::string> host_path(int dirfd, const std::string& path, int& err);
  int host_fd(int guest_fd) const;

  Kernel& kernel_;
  HostHook& hook_;
  std::filesystem::path root_;
  std::map<int, Open> fds_;
  SyscallTrace trace_;
};

/// Answers the proxy's syscalls from a recorded trace without touching the
/// host. Any mismatch in name or arguments, or running past the end of the
/// trace, raises `replay-divergence`.
class ReplayComponent : public Component {
 public:
  ReplayComponent(Kernel& kernel, std::shared_ptr<const SyscallTrace> trace);

  std::string name() const override { return "replay"; }
  bool implements(Sys s) const override;
  SyscallResult handle(const SyscallRequest& req) override;

  std::size_t cursor() const noexcept { return cursor_; }

 private:
  Kernel& kernel_;
  std::shared_ptr<const SyscallTrace> trace_;
  std::size_t cursor_ = 0;
};

// Syscalls covered by the proxy and replay components.
bool proxied_syscall(Sys s);

}  // namespace detos

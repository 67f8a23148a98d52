#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detos/component.hpp"

namespace detos {

using InodeId = std::uint64_t;

enum class InodeKind : std::uint32_t { regular = 0, directory = 1, symlink = 2, pipe = 3, socket = 4 };

std::string_view inode_kind_name(InodeKind k);

// Bounded byte queue shared by pipe ends and connected sockets.
struct Channel {
  std::uint64_t id = 0;
  std::deque<std::uint8_t> data;
  std::size_t capacity = 4096;
  int readers = 0;
  int writers = 0;
};

struct SocketState {
  enum class Role { unbound, listening, connected };
  Role role = Role::unbound;
  std::string address;
  int backlog = 0;
  std::deque<InodeId> pending;  // accepted-side endpoints waiting for accept()
  std::shared_ptr<Channel> in;
  std::shared_ptr<Channel> out;
};

struct Inode {
  InodeId id = 0;
  InodeKind kind = InodeKind::regular;
  std::uint32_t nlink = 0;
  std::uint32_t mode = 0;
  Bytes data;                              // file contents or symlink target
  std::map<std::string, InodeId> entries;  // directories
  InodeId parent = 0;                      // directories
  std::shared_ptr<Channel> pipe;
  std::optional<SocketState> socket;
  std::uint32_t open_count = 0;  // open file descriptions referring here
};

// An open file description; dup'd descriptors share one.
struct OpenFile {
  enum class End { none, read, write };
  InodeId inode = 0;
  std::uint64_t offset = 0;
  int flags = 0;
  End end = End::none;
  int console = -1;  // 1 or 2 for the stdout/stderr sinks
};

/// Memory-backed filesystem: inodes, directories, hard and soft links, the
/// descriptor table, pipes and local stream sockets.
///
/// No permission checks; mode bits are stored only. Socket addresses live in
/// their own namespace rather than as directory entries.
class Filesystem : public Component {
 public:
  static constexpr std::size_t kChannelCapacity = 4096;
  static constexpr int kMaxSymlinkDepth = 8;
  static constexpr int kMaxFds = 1024;

  Filesystem(Kernel& kernel, bool check_links);

  std::string name() const override { return "vfs"; }
  bool implements(Sys s) const override;
  SyscallResult handle(const SyscallRequest& req) override;

  // Opens fds 0 (stdin contents), 1 and 2 (console sinks).
  void attach_stdio(Bytes stdin_data);

  /// Preload manifest, one entry per line (`#` comments):
  ///   dir <path>
  ///   file <path> [payload-file]     payload relative to the manifest
  ///   symlink <path> <target>
  ///   link <path> <existing-path>    hard link
  /// Missing parent directories are created. Throws Error on bad input.
  void preload(const std::filesystem::path& manifest);
  void preload_text(std::string_view manifest, const std::filesystem::path& base);

  // Writes `manifest` plus `payloads/` under `dir`, in preload format.
  void dump(const std::filesystem::path& dir) const;

  InodeId root() const noexcept { return root_; }
  const Inode* inode(InodeId id) const;
  // Resolves an absolute path, following symlinks.
  std::optional<InodeId> lookup(std::string_view path) const;
  std::size_t inode_count() const noexcept { return inodes_.size(); }
  std::vector<int> open_fds() const;

  // nlink of every inode matches the directory entries referring to it.
  bool links_consistent() const;
  // Digest of the namespace and file contents.
  std::uint64_t state_digest() const;

 private:
  struct Resolution {
    int err = 0;
    InodeId parent = 0;
    std::string last;
    std::optional<InodeId> target;
  };

  Resolution resolve(InodeId start, std::string_view path, bool follow_last) const;
  int start_dir(int dirfd, InodeId& out) const;
  std::shared_ptr<OpenFile> description(int fd) const;
  int allocate_fd(std::shared_ptr<OpenFile> d, int min_fd = 0);
  int open_inode(InodeId id, int flags, OpenFile::End end = OpenFile::End::none);
  Inode& make_inode(InodeKind kind, std::uint32_t mode);
  void add_entry(InodeId dir, const std::string& name, InodeId target);
  void close_fd(int fd);
  void release(const OpenFile& d);
  void maybe_free(InodeId id);
  void destroy_endpoint(InodeId id);

  SyscallResult do_openat(int dirfd, const std::string& path, int flags, int mode);
  SyscallResult do_read(int fd, std::int64_t count);
  SyscallResult do_write(int fd, const Bytes& data);
  SyscallResult do_lseek(int fd, std::int64_t offset, int whence);
  SyscallResult do_pipe();
  SyscallResult do_dup(int fd);
  SyscallResult do_dup2(int fd, int newfd);
  SyscallResult do_fstat(int fd);
  SyscallResult do_fstatat(int dirfd, const std::string& path, int flags);
  SyscallResult do_mkdirat(int dirfd, const std::string& path, int mode);
  SyscallResult do_unlinkat(int dirfd, const std::string& path, int flags);
  SyscallResult do_linkat(int olddirfd, const std::string& oldpath, int newdirfd, const std::string& newpath,
                          int flags);
  SyscallResult do_symlinkat(const std::string& target, int dirfd, const std::string& linkpath);
  SyscallResult do_readlinkat(int dirfd, const std::string& path);
  SyscallResult do_getdents(int fd);
  SyscallResult do_socket();
  SyscallResult do_socketpair();
  SyscallResult do_bind(int fd, const std::string& address);
  SyscallResult do_listen(int fd, int backlog);
  SyscallResult do_connect(int fd, const std::string& address);
  SyscallResult do_accept(int fd);

  SyscallResult read_channel(const std::shared_ptr<Channel>& ch, std::size_t count);
  SyscallResult write_channel(const std::shared_ptr<Channel>& ch, const Bytes& data);
  SyscallResult stat_of(const Inode& n) const;
  std::shared_ptr<Channel> make_channel();
  Inode* socket_of(int fd, int& err);

  Kernel& kernel_;
  bool check_links_;
  std::map<InodeId, Inode> inodes_;
  InodeId root_ = 0;
  InodeId next_inode_ = 1;
  std::uint64_t next_channel_ = 1;
  std::vector<std::shared_ptr<OpenFile>> fds_;
  std::map<std::string, InodeId> bound_;
};

}  // namespace detos

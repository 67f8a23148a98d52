#include "detos/vfs.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <fstream>
#include <sstream>

#include "detos/error.hpp"
#include "detos/kernel.hpp"
#include "detos/scheduler.hpp"

namespace detos {

std::string_view inode_kind_name(InodeKind k) {
  switch (k) {
    case InodeKind::regular: return "regular";
    case InodeKind::directory: return "directory";
    case InodeKind::symlink: return "symlink";
    case InodeKind::pipe: return "pipe";
    case InodeKind::socket: return "socket";
  }
  return "?";
}

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

int access_mode(int flags) { return flags & O_ACCMODE; }
bool readable(int flags) { return access_mode(flags) == O_RDONLY || access_mode(flags) == O_RDWR; }
bool writable(int flags) { return access_mode(flags) == O_WRONLY || access_mode(flags) == O_RDWR; }

std::string readable_channel(std::uint64_t id) { return "chan-r:" + std::to_string(id); }
std::string writable_channel(std::uint64_t id) { return "chan-w:" + std::to_string(id); }
std::string accept_channel(InodeId id) { return "accept:" + std::to_string(id); }

bool mutating(Sys s) {
  switch (s) {
    case Sys::openat:
    case Sys::close:
    case Sys::write:
    case Sys::dup2:
    case Sys::mkdirat:
    case Sys::unlinkat:
    case Sys::linkat:
    case Sys::symlinkat:
      return true;
    default:
      return false;
  }
}

}  // namespace

Filesystem::Filesystem(Kernel& kernel, bool check_links) : kernel_(kernel), check_links_(check_links) {
  auto& root = make_inode(InodeKind::directory, 0755);
  root.nlink = 2;
  root.parent = root.id;
  root_ = root.id;
}

bool Filesystem::implements(Sys s) const {
  switch (s) {
    case Sys::openat:
    case Sys::close:
    case Sys::read:
    case Sys::write:
    case Sys::lseek:
    case Sys::pipe:
    case Sys::dup:
    case Sys::dup2:
    case Sys::fstat:
    case Sys::fstatat:
    case Sys::mkdirat:
    case Sys::unlinkat:
    case Sys::linkat:
    case Sys::symlinkat:
    case Sys::readlinkat:
    case Sys::getdents:
    case Sys::socket:
    case Sys::socketpair:
    case Sys::bind:
    case Sys::listen:
    case Sys::connect:
    case Sys::accept:
      return true;
    default:
      return false;
  }
}

SyscallResult Filesystem::handle(const SyscallRequest& req) {
  auto fd = [&](std::size_t i) { return std::get<Fd>(req.args[i]).value; };
  auto path = [&](std::size_t i) -> const std::string& { return std::get<Path>(req.args[i]).value; };
  auto num = [&](std::size_t i) { return std::get<std::int64_t>(req.args[i]); };

  SyscallResult r;
  switch (req.name) {
    case Sys::openat: r = do_openat(fd(0), path(1), static_cast<int>(num(2)), static_cast<int>(num(3))); break;
    case Sys::close:
      if (!description(fd(0))) {
        r = SyscallResult::fail(EBADF);
      } else {
        close_fd(fd(0));
        r = SyscallResult::ok(0);
      }
      break;
    case Sys::read: r = do_read(fd(0), num(1)); break;
    case Sys::write: r = do_write(fd(0), std::get<Bytes>(req.args[1])); break;
    case Sys::lseek: r = do_lseek(fd(0), num(1), static_cast<int>(num(2))); break;
    case Sys::pipe: r = do_pipe(); break;
    case Sys::dup: r = do_dup(fd(0)); break;
    case Sys::dup2: r = do_dup2(fd(0), fd(1)); break;
    case Sys::fstat: r = do_fstat(fd(0)); break;
    case Sys::fstatat: r = do_fstatat(fd(0), path(1), static_cast<int>(num(2))); break;
    case Sys::mkdirat: r = do_mkdirat(fd(0), path(1), static_cast<int>(num(2))); break;
    case Sys::unlinkat: r = do_unlinkat(fd(0), path(1), static_cast<int>(num(2))); break;
    case Sys::linkat: r = do_linkat(fd(0), path(1), fd(2), path(3), static_cast<int>(num(4))); break;
    case Sys::symlinkat: r = do_symlinkat(path(0), fd(1), path(2)); break;
    case Sys::readlinkat: r = do_readlinkat(fd(0), path(1)); break;
    case Sys::getdents: r = do_getdents(fd(0)); break;
    case Sys::socket: r = do_socket(); break;
    case Sys::socketpair: r = do_socketpair(); break;
    case Sys::bind: r = do_bind(fd(0), path(1)); break;
    case Sys::listen: r = do_listen(fd(0), static_cast<int>(num(1))); break;
    case Sys::connect: r = do_connect(fd(0), path(1)); break;
    case Sys::accept: r = do_accept(fd(0)); break;
    default: r = SyscallResult::fail(ENOSYS); break;
  }
  if (check_links_ && mutating(req.name) && !links_consistent())
    kernel_.raise_fault(FaultKind::vfs_violation,
                        "link accounting broken after " + describe(req.name, req.args));
  return r;
}

// ---------------------------------------------------------------------------
// inodes and descriptors

const Inode* Filesystem::inode(InodeId id) const {
  auto it = inodes_.find(id);
  return it == inodes_.end() ? nullptr : &it->second;
}

Inode& Filesystem::make_inode(InodeKind kind, std::uint32_t mode) {
  InodeId id = next_inode_++;
  auto& n = inodes_[id];
  n.id = id;
  n.kind = kind;
  n.mode = mode;
  return n;
}

std::shared_ptr<Channel> Filesystem::make_channel() {
  auto ch = std::make_shared<Channel>();
  ch->id = next_channel_++;
  ch->capacity = kChannelCapacity;
  return ch;
}

void Filesystem::add_entry(InodeId dir, const std::string& name, InodeId target) {
  inodes_.at(dir).entries[name] = target;
  auto& t = inodes_.at(target);
  if (t.kind == InodeKind::directory) {
    t.parent = dir;
    t.nlink = 2;
    ++inodes_.at(dir).nlink;
  } else {
    ++t.nlink;
  }
}

std::shared_ptr<OpenFile> Filesystem::description(int fd) const {
  if (fd < 0 || static_cast<std::size_t>(fd) >= fds_.size()) return nullptr;
  return fds_[fd];
}

std::vector<int> Filesystem::open_fds() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fds_.size(); ++i)
    if (fds_[i]) out.push_back(static_cast<int>(i));
  return out;
}

int Filesystem::allocate_fd(std::shared_ptr<OpenFile> d, int min_fd) {
  for (int i = min_fd; i < kMaxFds; ++i) {
    if (static_cast<std::size_t>(i) >= fds_.size()) fds_.resize(i + 1);
    if (!fds_[i]) {
      fds_[i] = std::move(d);
      return i;
    }
  }
  return -1;
}

int Filesystem::open_inode(InodeId id, int flags, OpenFile::End end) {
  auto d = std::make_shared<OpenFile>();
  d->inode = id;
  d->flags = flags;
  d->end = end;
  int fd = allocate_fd(d);
  if (fd >= 0) ++inodes_.at(id).open_count;
  return fd;
}

void Filesystem::attach_stdio(Bytes stdin_data) {
  auto& in = make_inode(InodeKind::regular, 0400);
  in.data = std::move(stdin_data);
  open_inode(in.id, O_RDONLY);
  for (int console : {1, 2}) {
    auto d = std::make_shared<OpenFile>();
    d->flags = O_WRONLY | O_APPEND;
    d->console = console;
    allocate_fd(std::move(d), console);
  }
}

void Filesystem::close_fd(int fd) {
  auto d = std::move(fds_[fd]);
  if (d.use_count() == 1) release(*d);
}

void Filesystem::release(const OpenFile& d) {
  if (d.console >= 0) return;
  auto it = inodes_.find(d.inode);
  if (it == inodes_.end()) return;
  auto& n = it->second;
  --n.open_count;
  if (n.kind == InodeKind::pipe) {
    if (d.end == OpenFile::End::read) {
      --n.pipe->readers;
      kernel_.scheduler().wake_all(writable_channel(n.pipe->id));
    } else if (d.end == OpenFile::End::write) {
      --n.pipe->writers;
      kernel_.scheduler().wake_all(readable_channel(n.pipe->id));
    }
  } else if (n.kind == InodeKind::socket && n.open_count == 0) {
    auto& s = *n.socket;
    if (!s.address.empty()) bound_.erase(s.address);
    s.address.clear();
    if (s.role == SocketState::Role::listening) {
      for (auto pending : s.pending) destroy_endpoint(pending);
      s.pending.clear();
    }
  }
  maybe_free(d.inode);
}

void Filesystem::destroy_endpoint(InodeId id) {
  auto it = inodes_.find(id);
  if (it == inodes_.end()) return;
  auto& n = it->second;
  if (n.socket && n.socket->role == SocketState::Role::connected) {
    --n.socket->in->readers;
    --n.socket->out->writers;
    kernel_.scheduler().wake_all(writable_channel(n.socket->in->id));
    kernel_.scheduler().wake_all(readable_channel(n.socket->out->id));
  }
  inodes_.erase(it);
}

void Filesystem::maybe_free(InodeId id) {
  auto it = inodes_.find(id);
  if (it == inodes_.end() || id == root_) return;
  if (it->second.nlink != 0 || it->second.open_count != 0) return;
  destroy_endpoint(id);
}

// ---------------------------------------------------------------------------
// path resolution

int Filesystem::start_dir(int dirfd, InodeId& out) const {
  if (dirfd == AT_FDCWD) {
    out = root_;
    return 0;
  }
  auto d = description(dirfd);
  if (!d || d->console >= 0) return d ? ENOTDIR : EBADF;
  if (inodes_.at(d->inode).kind != InodeKind::directory) return ENOTDIR;
  out = d->inode;
  return 0;
}

Filesystem::Resolution Filesystem::resolve(InodeId start, std::string_view path, bool follow_last) const {
  Resolution res;
  if (path.empty()) {
    res.err = ENOENT;
    return res;
  }
  auto parts = split_path(path);
  std::reverse(parts.begin(), parts.end());  // back() is the next component
  InodeId cur = path.front() == '/' ? root_ : start;
  int expansions = 0;

  while (!parts.empty()) {
    std::string name = std::move(parts.back());
    parts.pop_back();
    bool last = parts.empty();
    const auto& dir = inodes_.at(cur);
    if (dir.kind != InodeKind::directory) {
      res.err = ENOTDIR;
      return res;
    }
    if (name == ".") continue;
    if (name == "..") {
      cur = dir.parent;
      continue;
    }
    auto it = dir.entries.find(name);
    if (it == dir.entries.end()) {
      if (!last) {
        res.err = ENOENT;
        return res;
      }
      res.parent = cur;
      res.last = name;
      return res;
    }
    const auto& child = inodes_.at(it->second);
    if (child.kind == InodeKind::symlink && (!last || follow_last)) {
      if (++expansions > kMaxSymlinkDepth) {
        res.err = ELOOP;
        return res;
      }
      std::string target = to_string(child.data);
      auto more = split_path(target);
      for (auto m = more.rbegin(); m != more.rend(); ++m) parts.push_back(*m);
      if (!target.empty() && target.front() == '/') cur = root_;
      continue;
    }
    if (last) {
      res.parent = cur;
      res.last = name;
      res.target = child.id;
      return res;
    }
    cur = child.id;
  }
  res.parent = inodes_.at(cur).parent;
  res.target = cur;
  return res;
}

std::optional<InodeId> Filesystem::lookup(std::string_view path) const {
  if (path.empty() || path.front() != '/') return std::nullopt;
  auto r = resolve(root_, path, true);
  if (r.err) return std::nullopt;
  return r.target;
}

// ---------------------------------------------------------------------------
// file operations

SyscallResult Filesystem::do_openat(int dirfd, const std::string& path, int flags, int mode) {
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  bool exclusive = (flags & O_CREAT) && (flags & O_EXCL);
  auto res = resolve(start, path, !(flags & O_NOFOLLOW) && !exclusive);
  if (res.err) return SyscallResult::fail(res.err);

  InodeId id;
  if (!res.target) {
    if (!(flags & O_CREAT)) return SyscallResult::fail(ENOENT);
    if (flags & O_DIRECTORY) return SyscallResult::fail(EINVAL);
    auto& n = make_inode(InodeKind::regular, static_cast<std::uint32_t>(mode) & 07777);
    id = n.id;
    add_entry(res.parent, res.last, id);
  } else {
    if (exclusive) return SyscallResult::fail(EEXIST);
    auto& n = inodes_.at(*res.target);
    if (n.kind == InodeKind::symlink) return SyscallResult::fail(ELOOP);
    if (n.kind == InodeKind::directory && writable(flags)) return SyscallResult::fail(EISDIR);
    if ((flags & O_DIRECTORY) && n.kind != InodeKind::directory) return SyscallResult::fail(ENOTDIR);
    if ((flags & O_TRUNC) && n.kind == InodeKind::regular && writable(flags)) n.data.clear();
    id = n.id;
  }
  int fd = open_inode(id, flags & ~(O_CREAT | O_EXCL | O_TRUNC | O_NOFOLLOW));
  if (fd < 0) {
    maybe_free(id);
    return SyscallResult::fail(EMFILE);
  }
  return SyscallResult::ok(fd);
}

SyscallResult Filesystem::do_read(int fd, std::int64_t count) {
  auto d = description(fd);
  if (!d || !readable(d->flags) || d->console >= 0) return SyscallResult::fail(EBADF);
  if (count < 0) return SyscallResult::fail(EINVAL);
  auto& n = inodes_.at(d->inode);
  switch (n.kind) {
    case InodeKind::directory:
      return SyscallResult::fail(EISDIR);
    case InodeKind::pipe:
      return read_channel(n.pipe, static_cast<std::size_t>(count));
    case InodeKind::socket:
      if (n.socket->role != SocketState::Role::connected) return SyscallResult::fail(ENOTCONN);
      return read_channel(n.socket->in, static_cast<std::size_t>(count));
    default: {
      auto size = n.data.size();
      auto from = std::min<std::uint64_t>(d->offset, size);
      auto take = std::min<std::uint64_t>(static_cast<std::uint64_t>(count), size - from);
      auto r = SyscallResult::ok(static_cast<std::int64_t>(take));
      r.out.emplace_back(n.data.begin() + from, n.data.begin() + from + take);
      d->offset = from + take;
      return r;
    }
  }
}

SyscallResult Filesystem::do_write(int fd, const Bytes& data) {
  auto d = description(fd);
  if (!d || !writable(d->flags)) return SyscallResult::fail(EBADF);
  if (d->console >= 0) {
    kernel_.console_write(d->console, data);
    return SyscallResult::ok(static_cast<std::int64_t>(data.size()));
  }
  auto& n = inodes_.at(d->inode);
  switch (n.kind) {
    case InodeKind::directory:
      return SyscallResult::fail(EISDIR);
    case InodeKind::pipe:
      return write_channel(n.pipe, data);
    case InodeKind::socket:
      if (n.socket->role != SocketState::Role::connected) return SyscallResult::fail(ENOTCONN);
      return write_channel(n.socket->out, data);
    default: {
      if (d->flags & O_APPEND) d->offset = n.data.size();
      if (n.data.size() < d->offset + data.size()) n.data.resize(d->offset + data.size());
      std::copy(data.begin(), data.end(), n.data.begin() + static_cast<std::ptrdiff_t>(d->offset));
      d->offset += data.size();
      return SyscallResult::ok(static_cast<std::int64_t>(data.size()));
    }
  }
}

SyscallResult Filesystem::read_channel(const std::shared_ptr<Channel>& ch, std::size_t count) {
  while (true) {
    if (count == 0) return SyscallResult{0, 0, {Bytes{}}};
    if (!ch->data.empty()) {
      auto take = std::min(count, ch->data.size());
      Bytes out(ch->data.begin(), ch->data.begin() + static_cast<std::ptrdiff_t>(take));
      ch->data.erase(ch->data.begin(), ch->data.begin() + static_cast<std::ptrdiff_t>(take));
      kernel_.scheduler().wake_all(writable_channel(ch->id));
      return SyscallResult{static_cast<std::int64_t>(take), 0, {std::move(out)}};
    }
    if (ch->writers == 0) return SyscallResult{0, 0, {Bytes{}}};
    kernel_.scheduler().block(readable_channel(ch->id));
    if (kernel_.runtime().stopping()) return SyscallResult::fail(EINTR);
  }
}

SyscallResult Filesystem::write_channel(const std::shared_ptr<Channel>& ch, const Bytes& data) {
  std::size_t written = 0;
  while (written < data.size()) {
    if (ch->readers == 0) return written ? SyscallResult::ok(static_cast<std::int64_t>(written)) : SyscallResult::fail(EPIPE);
    auto space = ch->capacity - ch->data.size();
    if (space == 0) {
      kernel_.scheduler().block(writable_channel(ch->id));
      if (kernel_.runtime().stopping()) return SyscallResult::fail(EINTR);
      continue;
    }
    auto n = std::min(space, data.size() - written);
    ch->data.insert(ch->data.end(), data.begin() + static_cast<std::ptrdiff_t>(written),
                    data.begin() + static_cast<std::ptrdiff_t>(written + n));
    written += n;
    kernel_.scheduler().wake_all(readable_channel(ch->id));
  }
  return SyscallResult::ok(static_cast<std::int64_t>(written));
}

SyscallResult Filesystem::do_lseek(int fd, std::int64_t offset, int whence) {
  auto d = description(fd);
  if (!d) return SyscallResult::fail(EBADF);
  if (d->console >= 0) return SyscallResult::fail(ESPIPE);
  const auto& n = inodes_.at(d->inode);
  if (n.kind == InodeKind::pipe || n.kind == InodeKind::socket) return SyscallResult::fail(ESPIPE);
  std::int64_t base = 0;
  switch (whence) {
    case SEEK_SET: base = 0; break;
    case SEEK_CUR: base = static_cast<std::int64_t>(d->offset); break;
    case SEEK_END: base = static_cast<std::int64_t>(n.data.size()); break;
    default: return SyscallResult::fail(EINVAL);
  }
  if (base + offset < 0) return SyscallResult::fail(EINVAL);
  d->offset = static_cast<std::uint64_t>(base + offset);
  return SyscallResult::ok(static_cast<std::int64_t>(d->offset));
}

SyscallResult Filesystem::do_pipe() {
  auto& n = make_inode(InodeKind::pipe, 0600);
  n.pipe = make_channel();
  n.pipe->readers = 1;
  n.pipe->writers = 1;
  InodeId id = n.id;
  int rfd = open_inode(id, O_RDONLY, OpenFile::End::read);
  int wfd = rfd < 0 ? -1 : open_inode(id, O_WRONLY, OpenFile::End::write);
  if (wfd < 0) {
    if (rfd >= 0) close_fd(rfd);
    inodes_.erase(id);
    return SyscallResult::fail(EMFILE);
  }
  auto r = SyscallResult::ok(0);
  r.out.push_back(encode_fd_pair(rfd, wfd));
  return r;
}

SyscallResult Filesystem::do_dup(int fd) {
  auto d = description(fd);
  if (!d) return SyscallResult::fail(EBADF);
  int nfd = allocate_fd(d);
  return nfd < 0 ? SyscallResult::fail(EMFILE) : SyscallResult::ok(nfd);
}

SyscallResult Filesystem::do_dup2(int fd, int newfd) {
  auto d = description(fd);
  if (!d || newfd < 0 || newfd >= kMaxFds) return SyscallResult::fail(EBADF);
  if (fd == newfd) return SyscallResult::ok(newfd);
  if (description(newfd)) close_fd(newfd);
  if (static_cast<std::size_t>(newfd) >= fds_.size()) fds_.resize(newfd + 1);
  fds_[newfd] = d;
  return SyscallResult::ok(newfd);
}

SyscallResult Filesystem::stat_of(const Inode& n) const {
  FileStat st;
  st.ino = n.id;
  st.kind = static_cast<std::uint32_t>(n.kind);
  st.mode = n.mode;
  st.nlink = n.nlink;
  switch (n.kind) {
    case InodeKind::pipe: st.size = n.pipe->data.size(); break;
    case InodeKind::socket: st.size = n.socket->in ? n.socket->in->data.size() : 0; break;
    case InodeKind::directory: st.size = n.entries.size(); break;
    default: st.size = n.data.size(); break;
  }
  auto r = SyscallResult::ok(0);
  r.out.push_back(st.encode());
  return r;
}

SyscallResult Filesystem::do_fstat(int fd) {
  auto d = description(fd);
  if (!d) return SyscallResult::fail(EBADF);
  if (d->console >= 0) {
    Inode console;
    console.kind = InodeKind::regular;
    return stat_of(console);
  }
  return stat_of(inodes_.at(d->inode));
}

SyscallResult Filesystem::do_fstatat(int dirfd, const std::string& path, int flags) {
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  auto res = resolve(start, path, !(flags & AT_SYMLINK_NOFOLLOW));
  if (res.err) return SyscallResult::fail(res.err);
  if (!res.target) return SyscallResult::fail(ENOENT);
  return stat_of(inodes_.at(*res.target));
}

SyscallResult Filesystem::do_mkdirat(int dirfd, const std::string& path, int mode) {
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  auto res = resolve(start, path, false);
  if (res.err) return SyscallResult::fail(res.err);
  if (res.target) return SyscallResult::fail(EEXIST);
  auto& n = make_inode(InodeKind::directory, static_cast<std::uint32_t>(mode) & 07777);
  add_entry(res.parent, res.last, n.id);
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_unlinkat(int dirfd, const std::string& path, int flags) {
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  auto res = resolve(start, path, false);
  if (res.err) return SyscallResult::fail(res.err);
  if (!res.target) return SyscallResult::fail(ENOENT);
  auto& n = inodes_.at(*res.target);
  if (flags & AT_REMOVEDIR) {
    if (n.kind != InodeKind::directory) return SyscallResult::fail(ENOTDIR);
    if (n.id == root_) return SyscallResult::fail(EBUSY);
    if (res.last.empty() || res.last == "." || res.last == "..") return SyscallResult::fail(EINVAL);
    if (!n.entries.empty()) return SyscallResult::fail(ENOTEMPTY);
    inodes_.at(res.parent).entries.erase(res.last);
    --inodes_.at(res.parent).nlink;
    n.nlink = 0;
  } else {
    if (n.kind == InodeKind::directory) return SyscallResult::fail(EISDIR);
    inodes_.at(res.parent).entries.erase(res.last);
    --n.nlink;
  }
  maybe_free(n.id);
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_linkat(int olddirfd, const std::string& oldpath, int newdirfd,
                                    const std::string& newpath, int flags) {
  InodeId old_start = 0, new_start = 0;
  if (int err = start_dir(olddirfd, old_start)) return SyscallResult::fail(err);
  if (int err = start_dir(newdirfd, new_start)) return SyscallResult::fail(err);
  auto src = resolve(old_start, oldpath, (flags & AT_SYMLINK_FOLLOW) != 0);
  if (src.err) return SyscallResult::fail(src.err);
  if (!src.target) return SyscallResult::fail(ENOENT);
  if (inodes_.at(*src.target).kind == InodeKind::directory) return SyscallResult::fail(EPERM);
  auto dst = resolve(new_start, newpath, false);
  if (dst.err) return SyscallResult::fail(dst.err);
  if (dst.target) return SyscallResult::fail(EEXIST);
  add_entry(dst.parent, dst.last, *src.target);
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_symlinkat(const std::string& target, int dirfd, const std::string& linkpath) {
  if (target.empty()) return SyscallResult::fail(ENOENT);
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  auto res = resolve(start, linkpath, false);
  if (res.err) return SyscallResult::fail(res.err);
  if (res.target) return SyscallResult::fail(EEXIST);
  auto& n = make_inode(InodeKind::symlink, 0777);
  n.data = to_bytes(target);
  add_entry(res.parent, res.last, n.id);
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_readlinkat(int dirfd, const std::string& path) {
  InodeId start = 0;
  if (int err = start_dir(dirfd, start)) return SyscallResult::fail(err);
  auto res = resolve(start, path, false);
  if (res.err) return SyscallResult::fail(res.err);
  if (!res.target) return SyscallResult::fail(ENOENT);
  const auto& n = inodes_.at(*res.target);
  if (n.kind != InodeKind::symlink) return SyscallResult::fail(EINVAL);
  auto r = SyscallResult::ok(static_cast<std::int64_t>(n.data.size()));
  r.out.push_back(n.data);
  return r;
}

SyscallResult Filesystem::do_getdents(int fd) {
  auto d = description(fd);
  if (!d) return SyscallResult::fail(EBADF);
  if (d->console >= 0 || inodes_.at(d->inode).kind != InodeKind::directory) return SyscallResult::fail(ENOTDIR);
  Bytes names;
  const auto& dir = inodes_.at(d->inode);
  for (const auto& [name, id] : dir.entries) {
    names.insert(names.end(), name.begin(), name.end());
    names.push_back(0);
  }
  auto r = SyscallResult::ok(static_cast<std::int64_t>(dir.entries.size()));
  r.out.push_back(std::move(names));
  return r;
}

// ---------------------------------------------------------------------------
// sockets

Inode* Filesystem::socket_of(int fd, int& err) {
  auto d = description(fd);
  if (!d) {
    err = EBADF;
    return nullptr;
  }
  if (d->console >= 0 || inodes_.at(d->inode).kind != InodeKind::socket) {
    err = ENOTSOCK;
    return nullptr;
  }
  return &inodes_.at(d->inode);
}

SyscallResult Filesystem::do_socket() {
  auto& n = make_inode(InodeKind::socket, 0600);
  n.socket.emplace();
  InodeId id = n.id;
  int fd = open_inode(id, O_RDWR);
  if (fd < 0) {
    inodes_.erase(id);
    return SyscallResult::fail(EMFILE);
  }
  return SyscallResult::ok(fd);
}

SyscallResult Filesystem::do_socketpair() {
  auto a_to_b = make_channel();
  auto b_to_a = make_channel();
  auto& a = make_inode(InodeKind::socket, 0600);
  a.socket.emplace();
  a.socket->role = SocketState::Role::connected;
  a.socket->in = b_to_a;
  a.socket->out = a_to_b;
  InodeId aid = a.id;
  auto& b = make_inode(InodeKind::socket, 0600);
  b.socket.emplace();
  b.socket->role = SocketState::Role::connected;
  b.socket->in = a_to_b;
  b.socket->out = b_to_a;
  InodeId bid = b.id;
  a_to_b->readers = a_to_b->writers = 1;
  b_to_a->readers = b_to_a->writers = 1;

  int fa = open_inode(aid, O_RDWR);
  int fb = fa < 0 ? -1 : open_inode(bid, O_RDWR);
  if (fb < 0) {
    if (fa >= 0) close_fd(fa);
    else destroy_endpoint(aid);
    destroy_endpoint(bid);
    return SyscallResult::fail(EMFILE);
  }
  auto r = SyscallResult::ok(0);
  r.out.push_back(encode_fd_pair(fa, fb));
  return r;
}

SyscallResult Filesystem::do_bind(int fd, const std::string& address) {
  int err = 0;
  Inode* n = socket_of(fd, err);
  if (!n) return SyscallResult::fail(err);
  if (address.empty()) return SyscallResult::fail(EINVAL);
  if (n->socket->role != SocketState::Role::unbound || !n->socket->address.empty())
    return SyscallResult::fail(EINVAL);
  if (bound_.count(address)) return SyscallResult::fail(EADDRINUSE);
  bound_[address] = n->id;
  n->socket->address = address;
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_listen(int fd, int backlog) {
  int err = 0;
  Inode* n = socket_of(fd, err);
  if (!n) return SyscallResult::fail(err);
  if (n->socket->role == SocketState::Role::connected) return SyscallResult::fail(EINVAL);
  if (n->socket->address.empty()) return SyscallResult::fail(EDESTADDRREQ);
  n->socket->role = SocketState::Role::listening;
  n->socket->backlog = std::max(backlog, 1);
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_connect(int fd, const std::string& address) {
  int err = 0;
  Inode* client = socket_of(fd, err);
  if (!client) return SyscallResult::fail(err);
  if (client->socket->role == SocketState::Role::connected) return SyscallResult::fail(EISCONN);
  if (client->socket->role == SocketState::Role::listening) return SyscallResult::fail(EINVAL);
  auto it = bound_.find(address);
  if (it == bound_.end()) return SyscallResult::fail(ECONNREFUSED);
  InodeId listener = it->second;
  if (inodes_.at(listener).socket->role != SocketState::Role::listening) return SyscallResult::fail(ECONNREFUSED);

  InodeId client_id = client->id;
  auto c2s = make_channel();
  auto s2c = make_channel();
  auto& server = make_inode(InodeKind::socket, 0600);
  server.socket.emplace();
  server.socket->role = SocketState::Role::connected;
  server.socket->in = c2s;
  server.socket->out = s2c;
  InodeId server_id = server.id;

  auto& c = *inodes_.at(client_id).socket;
  c.role = SocketState::Role::connected;
  c.in = s2c;
  c.out = c2s;
  c2s->readers = c2s->writers = 1;
  s2c->readers = s2c->writers = 1;

  inodes_.at(listener).socket->pending.push_back(server_id);
  kernel_.scheduler().wake_all(accept_channel(listener));
  return SyscallResult::ok(0);
}

SyscallResult Filesystem::do_accept(int fd) {
  auto d = description(fd);
  int err = 0;
  if (!socket_of(fd, err)) return SyscallResult::fail(err);
  InodeId listener = d->inode;
  if (inodes_.at(listener).socket->role != SocketState::Role::listening) return SyscallResult::fail(EINVAL);
  while (true) {
    auto& queue = inodes_.at(listener).socket->pending;
    if (!queue.empty()) {
      InodeId endpoint = queue.front();
      queue.pop_front();
      int nfd = open_inode(endpoint, O_RDWR);
      if (nfd < 0) {
        destroy_endpoint(endpoint);
        return SyscallResult::fail(EMFILE);
      }
      return SyscallResult::ok(nfd);
    }
    kernel_.scheduler().block(accept_channel(listener));
    if (kernel_.runtime().stopping()) return SyscallResult::fail(EINTR);
  }
}

// ---------------------------------------------------------------------------
// invariants, preload, dump

bool Filesystem::links_consistent() const {
  std::map<InodeId, std::uint32_t> refs;
  std::map<InodeId, std::uint32_t> subdirs;
  for (const auto& [id, n] : inodes_) {
    if (n.kind != InodeKind::directory) continue;
    for (const auto& [name, child] : n.entries) {
      auto it = inodes_.find(child);
      if (it == inodes_.end()) return false;
      if (it->second.kind == InodeKind::directory) ++subdirs[id];
      else ++refs[child];
    }
  }
  for (const auto& [id, n] : inodes_) {
    if (n.kind == InodeKind::directory) {
      if (n.nlink != 0 && n.nlink != 2 + subdirs[id]) return false;
    } else if (n.nlink != refs[id]) {
      return false;
    }
  }
  return true;
}

std::uint64_t Filesystem::state_digest() const {
  ByteWriter w;
  std::vector<std::pair<std::string, InodeId>> stack{{"", root_}};
  while (!stack.empty()) {
    auto [path, id] = stack.back();
    stack.pop_back();
    const auto& n = inodes_.at(id);
    w.blob(path);
    w.u32(static_cast<std::uint32_t>(n.kind));
    w.u32(n.nlink);
    if (n.kind == InodeKind::directory) {
      for (auto it = n.entries.rbegin(); it != n.entries.rend(); ++it) stack.push_back({path + "/" + it->first, it->second});
    } else {
      w.blob(n.data);
    }
  }
  return digest_of(w.bytes());
}

void Filesystem::preload(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error("cannot read preload manifest " + manifest.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  preload_text(ss.str(), manifest.parent_path());
}

void Filesystem::preload_text(std::string_view manifest, const std::filesystem::path& base) {
  auto ensure_dirs = [&](const std::vector<std::string>& parts, std::size_t count) {
    InodeId cur = root_;
    for (std::size_t i = 0; i < count; ++i) {
      auto& dir = inodes_.at(cur);
      auto it = dir.entries.find(parts[i]);
      if (it == dir.entries.end()) {
        auto& d = make_inode(InodeKind::directory, 0755);
        InodeId did = d.id;
        add_entry(cur, parts[i], did);
        cur = did;
      } else {
        if (inodes_.at(it->second).kind != InodeKind::directory)
          throw Error("preload: '" + parts[i] + "' is not a directory");
        cur = it->second;
      }
    }
    return cur;
  };

  std::istringstream lines{std::string(manifest)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string kind, path, arg;
    if (!(fields >> kind) || kind.front() == '#') continue;
    auto where = "preload line " + std::to_string(line_no) + ": ";
    if (!(fields >> path) || path.front() != '/') throw Error(where + "expected an absolute path");
    std::getline(fields >> std::ws, arg);
    auto parts = split_path(path);
    if (parts.empty()) {
      if (kind == "dir") continue;
      throw Error(where + "cannot replace the root directory");
    }
    if (kind == "dir") {
      ensure_dirs(parts, parts.size());
      continue;
    }
    InodeId parent = ensure_dirs(parts, parts.size() - 1);
    if (inodes_.at(parent).entries.count(parts.back())) throw Error(where + path + " already exists");

    if (kind == "file") {
      auto& n = make_inode(InodeKind::regular, 0644);
      if (!arg.empty()) {
        std::ifstream payload(base / arg, std::ios::binary);
        if (!payload) throw Error(where + "cannot read payload " + (base / arg).string());
        n.data.assign(std::istreambuf_iterator<char>(payload), std::istreambuf_iterator<char>());
      }
      add_entry(parent, parts.back(), n.id);
    } else if (kind == "symlink") {
      if (arg.empty()) throw Error(where + "symlink needs a target");
      auto& n = make_inode(InodeKind::symlink, 0777);
      n.data = to_bytes(arg);
      add_entry(parent, parts.back(), n.id);
    } else if (kind == "link") {
      auto existing = resolve(root_, arg, false);
      if (existing.err || !existing.target) throw Error(where + "link source " + arg + " does not exist");
      if (inodes_.at(*existing.target).kind == InodeKind::directory)
        throw Error(where + "cannot hard-link a directory");
      add_entry(parent, parts.back(), *existing.target);
    } else {
      throw Error(where + "unknown entry kind '" + kind + "'");
    }
  }
}

void Filesystem::dump(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "payloads");
  std::ofstream manifest(dir / "manifest", std::ios::binary);
  if (!manifest) throw Error("cannot write " + (dir / "manifest").string());

  std::map<InodeId, std::string> first_path;
  std::vector<std::pair<std::string, InodeId>> stack{{"", root_}};
  while (!stack.empty()) {
    auto [path, id] = stack.back();
    stack.pop_back();
    const auto& n = inodes_.at(id);
    if (n.kind == InodeKind::directory) {
      if (!path.empty()) manifest << "dir " << path << '\n';
      for (auto it = n.entries.rbegin(); it != n.entries.rend(); ++it)
        stack.push_back({path + "/" + it->first, it->second});
      continue;
    }
    if (auto seen = first_path.find(id); seen != first_path.end()) {
      manifest << "link " << path << ' ' << seen->second << '\n';
      continue;
    }
    first_path[id] = path;
    if (n.kind == InodeKind::symlink) {
      manifest << "symlink " << path << ' ' << to_string(n.data) << '\n';
    } else if (n.kind == InodeKind::regular) {
      if (n.data.empty()) {
        manifest << "file " << path << '\n';
      } else {
        auto payload = "payloads/" + std::to_string(id) + ".bin";
        std::ofstream out(dir / payload, std::ios::binary);
        out.write(reinterpret_cast<const char*>(n.data.data()), static_cast<std::streamsize>(n.data.size()));
        manifest << "file " << path << ' ' << payload << '\n';
      }
    }
  }
}

}  // namespace detos

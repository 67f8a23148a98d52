#include <fcntl.h>

#include <cerrno>

#include "detos/programs.hpp"

namespace detos {

namespace {

int hello(Guest& g) {
  g.write(1, "hello from the guest\n");
  return 0;
}

int files(Guest& g) {
  g.assert_that(g.mkdir("/data") == 0, "mkdir /data");
  g.assert_that(g.mkdir("/data") == -1 && g.err() == EEXIST, "second mkdir must fail with EEXIST");

  int fd = g.open("/data/notes.txt", O_CREAT | O_RDWR);
  g.write(fd, "first line\n");
  g.write(fd, "second line\n");
  g.lseek(fd, 0, SEEK_SET);
  auto text = g.read_text(fd);
  g.assert_that(text == "first line\nsecond line\n", "read back what was written");
  g.close(fd);

  g.symlink("notes.txt", "/data/latest");
  FileStat st;
  g.stat("/data/latest", st);
  g.assert_that(st.size == text.size(), "stat follows the symlink");

  int dir = g.open("/data", O_RDONLY | O_DIRECTORY);
  int rel = g.openat(dir, "latest", O_RDONLY);
  g.assert_that(g.read_text(rel, 5) == "first", "openat relative to a directory fd");
  g.close(rel);
  std::vector<std::string> names;
  g.getdents(dir, names);
  g.close(dir);

  std::string listing;
  for (const auto& n : names) listing += n + " ";
  g.write(1, "ls /data: " + listing + "\n");

  g.assert_that(g.open("/missing", O_RDONLY) == -1 && g.err() == ENOENT, "ENOENT for a missing file");
  g.unlink("/data/latest");
  g.unlink("/data/notes.txt");
  g.assert_that(g.rmdir("/data") == 0, "rmdir an emptied directory");
  return 0;
}

int pipes(Guest& g) {
  std::array<int, 2> p{};
  g.pipe(p);
  auto writer = g.thread_create([p](Guest& w) {
    for (int i = 0; i < 3; ++i) w.write(p[1], "msg" + std::to_string(i) + ";");
    w.close(p[1]);
    return 0;
  });
  std::string got;
  while (true) {
    Bytes buf;
    auto n = g.read(p[0], buf, 64);
    if (n <= 0) break;
    got += to_string(buf);
  }
  g.close(p[0]);
  g.thread_join(writer);
  g.write(1, "pipe carried: " + got + "\n");
  g.assert_that(got == "msg0;msg1;msg2;", "pipe preserves order and content");
  return 0;
}

int sockets(Guest& g) {
  int s = g.socket();
  g.bind(s, "/run/echo");
  g.listen(s, 4);
  auto client = g.thread_create([](Guest& c) {
    int fd = c.socket();
    c.assert_that(c.connect(fd, "/run/echo") == 0, "connect to the listener");
    c.write(fd, "ping");
    auto reply = c.read_text(fd, 16);
    c.close(fd);
    c.assert_that(reply == "PING", "echo reply");
    return 0;
  });
  int conn = g.accept(s);
  auto req = g.read_text(conn, 16);
  for (auto& ch : req) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  g.write(conn, req);
  g.close(conn);
  g.thread_join(client);
  g.close(s);
  g.write(1, "served " + req + "\n");
  return 0;
}

int hardlinks(Guest& g) {
  int fd = g.open("/x", O_CREAT | O_WRONLY);
  g.write(fd, "payload");
  g.close(fd);
  g.link("/x", "/y");
  FileStat st;
  g.stat("/y", st);
  g.assert_that(st.nlink == 2, "two names, nlink 2");
  g.unlink("/x");
  g.stat("/y", st);
  g.assert_that(st.nlink == 1, "one name left");

  int keep = g.open("/y", O_RDONLY);
  g.unlink("/y");
  g.assert_that(g.stat("/y", st) == -1, "name gone");
  g.assert_that(g.read_text(keep) == "payload", "data readable while open after unlink");
  g.fstat(keep, st);
  g.write(1, "nlink after unlink: " + std::to_string(st.nlink) + "\n");
  g.close(keep);
  return 0;
}

// Needs a fresh filesystem: O_EXCL fails if /f survived an earlier run.
int create_f(Guest& g) {
  int fd = g.open("/f", O_CREAT | O_EXCL | O_WRONLY);
  g.assert_that(fd >= 0, "/f already existed");
  g.write(fd, "created");
  g.close(fd);
  return 0;
}

int stdin_echo(Guest& g) {
  auto text = g.read_text(0);
  g.write(1, "stdin: " + text + "\n");
  return 0;
}

int symlink_loop(Guest& g) {
  g.symlink("/loop_b", "/loop_a");
  g.symlink("/loop_a", "/loop_b");
  int fd = g.open("/loop_a", O_RDONLY);
  g.assert_that(fd == -1 && g.err() == ELOOP, "symlink cycle must end in ELOOP");
  return 0;
}

// Stays inside the filesystem component; with it removed, the stub answers.
int touch(Guest& g) {
  int fd = g.open("/touched", O_CREAT | O_WRONLY);
  g.close(fd);
  return fd >= 0 ? 0 : 1;
}

}  // namespace

void register_file_programs(ProgramRegistry& r) {
  r.add({"hello", "writes a greeting to stdout", hello, {}});
  r.add({"files", "directories, files, symlinks and *at calls", files, {}});
  r.add({"pipes", "a writer task streams through a pipe to main", pipes, {}});
  r.add({"sockets", "echo over a local stream socket", sockets, {}});
  r.add({"hardlinks", "nlink accounting and unlink while open", hardlinks, {}});
  r.add({"create_f", "creates /f exclusively", create_f, {}});
  r.add({"stdin_echo", "copies stdin to stdout", stdin_echo, {}});
  r.add({"symlink_loop", "two symlinks pointing at each other", symlink_loop, {}});
  r.add({"touch", "creates one file", touch, {}});
}

}  // namespace detos

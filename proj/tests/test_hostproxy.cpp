#include <fcntl.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <random>

#include "detos/error.hpp"
#include "detos/explorer.hpp"
#include "detos/guest.hpp"
#include "detos/hostproxy.hpp"
#include "detos/programs.hpp"

using namespace detos;
namespace fs = std::filesystem;

namespace {

class Sandbox {
 public:
  Sandbox() {
    std::random_device rd;
    root_ = fs::temp_directory_path() / ("detos-sandbox-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
    fs::create_directories(root_);
  }
  ~Sandbox() { fs::remove_all(root_); }
  const fs::path& path() const { return root_; }

 private:
  fs::path root_;
};

Config proxy_config(const fs::path& root) {
  Config cfg;
  cfg.fs = FsProvider::proxy;
  cfg.host_hook = true;
  cfg.sandbox = root;
  return cfg;
}

Config replay_config(std::shared_ptr<const SyscallTrace> trace) {
  Config cfg;
  cfg.fs = FsProvider::replay;
  cfg.replay_trace = std::move(trace);
  return cfg;
}

SyscallTrace three_records() {
  SyscallTrace t;
  t.config_digest = 0x1122334455667788ULL;
  t.records.push_back({0, Sys::openat, {Fd{-100}, Path{"/a"}, std::int64_t{O_RDONLY}, std::int64_t{0}}, {3, 0, {}}});
  t.records.push_back({1, Sys::read, {Fd{3}, std::int64_t{4}}, {4, 0, {to_bytes("data")}}});
  t.records.push_back({2, Sys::close, {Fd{3}}, {-1, EBADF, {}}});
  return t;
}

}  // namespace

TEST(Trace, BinaryRoundTrip) {
  auto t = three_records();
  auto back = SyscallTrace::decode(t.encode());
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.encode(), t.encode());
}

TEST(Trace, SaveAndLoadAreBitExact) {
  Sandbox box;
  auto t = three_records();
  auto file = box.path() / "t.bin";
  t.save(file);
  std::ifstream in(file, std::ios::binary);
  Bytes on_disk((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(on_disk, t.encode());
  EXPECT_EQ(SyscallTrace::load(file), t);
}

TEST(Trace, HeaderLayout) {
  auto bytes = three_records().encode();
  ASSERT_GE(bytes.size(), 17u);
  EXPECT_EQ(bytes[0], SyscallTrace::kVersion);
  EXPECT_EQ(std::string(bytes.begin() + 1, bytes.begin() + 5), "DTRC");
  EXPECT_EQ(bytes[5], 0x88);  // little-endian digest
  EXPECT_EQ(bytes[13], 3);    // record count
}

TEST(Trace, EveryTruncationIsRejected) {
  auto bytes = three_records().encode();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    try {
      SyscallTrace::decode(std::span(bytes.data(), n));
      ADD_FAILURE() << "prefix of " << n << " bytes decoded";
    } catch (const TraceError& e) {
      EXPECT_EQ(e.kind(), TraceError::Kind::truncated) << n;
    }
  }
}

TEST(Trace, BadMagicIsCorrupt) {
  auto bytes = three_records().encode();
  bytes[2] = 'X';
  try {
    SyscallTrace::decode(bytes);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::corrupt);
  }
}

TEST(Trace, UnknownVersionIsRejected) {
  auto bytes = three_records().encode();
  bytes[0] = 99;
  try {
    SyscallTrace::decode(bytes);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::version);
  }
}

TEST(Trace, TrailingGarbageIsCorrupt) {
  auto bytes = three_records().encode();
  bytes.push_back(0);
  EXPECT_THROW(SyscallTrace::decode(bytes), TraceError);
}

TEST(Trace, NonIncreasingSeqIsCorrupt) {
  auto t = three_records();
  t.records[2].seq = 1;
  EXPECT_THROW(SyscallTrace::decode(t.encode()), TraceError);
}

TEST(Trace, TextDumpListsEveryRecord) {
  auto text = three_records().to_text();
  EXPECT_NE(text.find("openat"), std::string::npos);
  EXPECT_NE(text.find("read"), std::string::npos);
  EXPECT_NE(text.find("errno=" + std::to_string(EBADF)), std::string::npos);
  EXPECT_NE(text.find("[4 bytes]"), std::string::npos);
}

TEST(Proxy, EveryCallIsRecordedOnce) {
  Sandbox box;
  auto r = run_once(
      [](Guest& g) {
        int fd = g.open("/f", O_CREAT | O_WRONLY);
        g.write(fd, "xyz");
        g.close(fd);
        g.open("/missing", O_RDONLY);
        g.clock_gettime(CLOCK_MONOTONIC);
        return 0;
      },
      proxy_config(box.path()), ChoiceSource::explorer({}));
  ASSERT_EQ(r.outcome, Outcome::exited) << r.detail;
  ASSERT_TRUE(r.trace);
  ASSERT_EQ(r.trace->records.size(), 5u);
  EXPECT_EQ(r.trace->records[3].result.err, ENOENT);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.trace->records[i].seq, i);
  EXPECT_EQ(r.host_calls, 4u + 1u);  // four file calls and one clock read, each a single host call
  std::ifstream in(box.path() / "f");
  std::string content((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(content, "xyz");
}

TEST(Proxy, GuestDescriptorsStartAtThree) {
  Sandbox box;
  std::vector<int> fds;
  run_once(
      [&](Guest& g) {
        fds.push_back(g.open("/a", O_CREAT | O_WRONLY));
        fds.push_back(g.open("/b", O_CREAT | O_WRONLY));
        g.close(fds[0]);
        fds.push_back(g.open("/c", O_CREAT | O_WRONLY));
        return 0;
      },
      proxy_config(box.path()), ChoiceSource::explorer({}));
  EXPECT_EQ(fds, (std::vector<int>{3, 4, 3}));
}

TEST(Proxy, DotDotAboveTheRootIsAViolation) {
  Sandbox box;
  auto r = run_once(builtin_programs().find("escape")->main, proxy_config(box.path()), ChoiceSource::explorer({}));
  EXPECT_EQ(r.fault, FaultKind::vfs_violation);
  EXPECT_TRUE(r.console_out.empty());
}

TEST(Proxy, DotDotThatStaysInsideIsFine) {
  Sandbox box;
  auto r = run_once(
      [](Guest& g) {
        g.mkdir("/d");
        return g.open("/d/../inside", O_CREAT | O_WRONLY) >= 0 ? 0 : 1;
      },
      proxy_config(box.path()), ChoiceSource::explorer({}));
  EXPECT_EQ(r.outcome, Outcome::exited);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(fs::exists(box.path() / "inside"));
}

TEST(Proxy, EscapingSymlinkTargetIsAViolation) {
  for (std::string target : {"/etc/passwd", "../../outside"}) {
    Sandbox box;
    auto r = run_once([&](Guest& g) { return g.symlink(target, "/link"); }, proxy_config(box.path()),
                      ChoiceSource::explorer({}));
    EXPECT_EQ(r.fault, FaultKind::vfs_violation) << target;
    EXPECT_FALSE(fs::is_symlink(box.path() / "link")) << target;
  }
}

TEST(Proxy, ConsoleWritesAreRecordedButStayOffTheHost) {
  Sandbox box;
  auto r = run_once(builtin_programs().find("hello")->main, proxy_config(box.path()), ChoiceSource::explorer({}));
  EXPECT_EQ(r.console_out, "hello from the guest\n");
  ASSERT_EQ(r.trace->records.size(), 1u);
  EXPECT_EQ(r.trace->records[0].name, Sys::write);
  EXPECT_EQ(r.host_calls, 0u);
}

TEST(Replay, IdenticalEventsWithoutHostCalls) {
  Sandbox box;
  auto program = builtin_programs().find("hostfiles")->main;
  auto rec = run_once(program, proxy_config(box.path()), ChoiceSource::explorer({}));
  ASSERT_EQ(rec.outcome, Outcome::exited) << rec.detail;
  ASSERT_GE(rec.trace->records.size(), 10u);
  EXPECT_GT(rec.host_calls, 0u);

  auto rep = run_once(program, replay_config(rec.trace), ChoiceSource::explorer({}));
  EXPECT_EQ(rep.outcome, Outcome::exited) << rep.detail;
  EXPECT_EQ(rep.host_calls, 0u);
  EXPECT_EQ(rep.events, rec.events);
  EXPECT_EQ(rep.console_out, rec.console_out);
}

TEST(Replay, WorksFromASavedFileAfterTheSandboxIsGone) {
  EventLog recorded;
  auto file = fs::temp_directory_path() / ("detos-trace-" + std::to_string(::getpid()) + ".bin");
  {
    Sandbox box;
    auto rec = run_once(builtin_programs().find("hostfiles")->main, proxy_config(box.path()),
                        ChoiceSource::explorer({}));
    rec.trace->save(file);
    recorded = rec.events;
  }
  Config cfg;
  cfg.fs = FsProvider::replay;
  cfg.trace = file;
  auto rep = run_once(builtin_programs().find("hostfiles")->main, cfg, ChoiceSource::explorer({}));
  fs::remove(file);
  EXPECT_EQ(rep.events, recorded);
}

TEST(Replay, EmptyTraceDivergesOnTheFirstCall) {
  auto empty = std::make_shared<SyscallTrace>();
  empty->config_digest = Config{}.behaviour_digest();
  auto r = run_once(builtin_programs().find("hostfiles")->main, replay_config(empty), ChoiceSource::explorer({}));
  EXPECT_TRUE(r.diverged());
  EXPECT_NE(r.detail.find("mkdirat"), std::string::npos);
}

TEST(Replay, AlteredPathNamesExpectedAndActual) {
  Sandbox box;
  auto rec = run_once(builtin_programs().find("hostfiles")->main, proxy_config(box.path()),
                      ChoiceSource::explorer({}));
  auto r = run_once(builtin_programs().find("hostfiles_altered")->main, replay_config(rec.trace),
                    ChoiceSource::explorer({}));
  EXPECT_TRUE(r.diverged());
  EXPECT_NE(r.detail.find("a.txt"), std::string::npos) << r.detail;
  EXPECT_NE(r.detail.find("b.txt"), std::string::npos) << r.detail;
  EXPECT_EQ(r.host_calls, 0u);
}

TEST(Replay, DifferentBehaviourConfigIsRejected) {
  Sandbox box;
  auto rec = run_once(builtin_programs().find("hello")->main, proxy_config(box.path()), ChoiceSource::explorer({}));
  auto cfg = replay_config(rec.trace);
  cfg.scheduler = SchedulerKind::sync;
  EXPECT_THROW(Kernel::boot(cfg), ConfigError);
}

TEST(Replay, UnproxiedCallsFallThroughToTheStub) {
  auto empty = std::make_shared<SyscallTrace>();
  empty->config_digest = Config{}.behaviour_digest();
  auto r = run_once(
      [](Guest& g) {
        std::array<int, 2> p{};
        return g.pipe(p);
      },
      replay_config(empty), ChoiceSource::explorer({}));
  EXPECT_EQ(r.fault, FaultKind::unsupported_syscall);
  EXPECT_NE(r.detail.find("pipe"), std::string::npos);
}

TEST(ProxiedSet, FilesAndClocksOnly) {
  EXPECT_TRUE(proxied_syscall(Sys::openat));
  EXPECT_TRUE(proxied_syscall(Sys::clock_gettime));
  EXPECT_FALSE(proxied_syscall(Sys::thread_create));
  EXPECT_FALSE(proxied_syscall(Sys::socket));
}

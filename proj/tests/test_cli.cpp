#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Output {
  int status = -1;
  std::string text;  // stdout and stderr interleaved
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("detos-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Output detos(const std::string& args) {
    std::string cmd = "cd '" + dir_.string() + "' && '" DETOS_BINARY "' " + args + " 2>&1";
    Output out;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.text.append(buf, n);
    int raw = ::pclose(p);
    out.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return out;
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
};

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_F(Cli, ListShowsPrograms) {
  auto o = detos("list");
  EXPECT_EQ(o.status, 0);
  EXPECT_TRUE(contains(o.text, "interleave2x2"));
  EXPECT_TRUE(contains(o.text, "deadlock_abba"));
}

TEST_F(Cli, RunPrintsEventsAndOutcome) {
  auto o = detos("run hello");
  EXPECT_EQ(o.status, 0) << o.text;
  EXPECT_TRUE(contains(o.text, "syscall-enter write"));
  EXPECT_TRUE(contains(o.text, "hello from the guest"));
  EXPECT_TRUE(contains(o.text, "outcome: exited code=0"));
}

TEST_F(Cli, ExploreInterleavings) {
  auto o = detos("explore interleave2x2");
  EXPECT_EQ(o.status, 0) << o.text;
  EXPECT_TRUE(contains(o.text, "explored 6 executions, 6 distinct event logs, 0 verdicts")) << o.text;
  EXPECT_FALSE(fs::exists(dir_ / "verdicts"));
}

TEST_F(Cli, ExploreRaceWritesReplayableVerdicts) {
  auto o = detos("explore counter");
  EXPECT_EQ(o.status, 1) << o.text;
  EXPECT_TRUE(contains(o.text, "FAULT assertion counter choices="));
  ASSERT_TRUE(fs::exists(dir_ / "verdicts" / "verdict-0.choices"));
  auto again = detos("run counter --choices verdicts/verdict-0.choices --events replayed.events");
  EXPECT_EQ(again.status, 1) << again.text;
  EXPECT_TRUE(contains(again.text, "FAULT assertion counter"));
  EXPECT_EQ(slurp(dir_ / "replayed.events"), slurp(dir_ / "verdicts" / "verdict-0.events"));
}

TEST_F(Cli, ExploreDeadlock) {
  auto o = detos("explore deadlock_abba --out ''");
  EXPECT_EQ(o.status, 1) << o.text;
  EXPECT_TRUE(contains(o.text, "FAULT deadlock deadlock_abba"));
  EXPECT_FALSE(fs::exists(dir_ / "verdicts"));
}

TEST_F(Cli, FairBoundAndDepthBound) {
  auto fair = detos("explore busywait --scheduler fair --fair-bound 8");
  EXPECT_EQ(fair.status, 0) << fair.text;
  EXPECT_TRUE(contains(fair.text, "explored 9 executions")) << fair.text;
  auto async = detos("explore busywait --scheduler async --max-depth 20 --budget 50");
  EXPECT_EQ(async.status, 0) << async.text;
  EXPECT_FALSE(contains(async.text, " 0 depth-bound hits")) << async.text;
}

TEST_F(Cli, AllocationInjection) {
  auto o = detos("explore alloc3");
  EXPECT_TRUE(contains(o.text, "explored 8 executions")) << o.text;
}

TEST_F(Cli, StubFaultNamesTheSyscall) {
  auto o = detos("run touch --fs none");
  EXPECT_EQ(o.status, 1);
  EXPECT_TRUE(contains(o.text, "FAULT unsupported-syscall touch")) << o.text;
  EXPECT_TRUE(contains(o.text, "openat")) << o.text;
}

TEST_F(Cli, RecordThenReplay) {
  fs::create_directories(dir_ / "box");
  auto rec = detos("record hostfiles --sandbox box --trace t.bin --events rec.events");
  ASSERT_EQ(rec.status, 0) << rec.text;
  auto rep = detos("replay hostfiles --trace t.bin --events rep.events");
  EXPECT_EQ(rep.status, 0) << rep.text;
  EXPECT_TRUE(contains(rep.text, "host calls: 0"));
  EXPECT_EQ(slurp(dir_ / "rec.events"), slurp(dir_ / "rep.events"));

  auto dump = detos("trace-dump t.bin");
  EXPECT_EQ(dump.status, 0);
  EXPECT_TRUE(contains(dump.text, "mkdirat"));

  auto diverged = detos("replay hostfiles_altered --trace t.bin --events /dev/null");
  EXPECT_EQ(diverged.status, 3) << diverged.text;
  EXPECT_TRUE(contains(diverged.text, "replay-divergence"));
}

TEST_F(Cli, SandboxEscape) {
  fs::create_directories(dir_ / "box");
  auto o = detos("run escape --sandbox box");
  EXPECT_EQ(o.status, 1);
  EXPECT_TRUE(contains(o.text, "FAULT vfs-violation escape"));
}

TEST_F(Cli, WrongChoiceLogIsADivergence) {
  {
    std::ofstream(dir_ / "bad.choices") << "3 2\n";
  }
  auto o = detos("run counter --choices bad.choices");
  EXPECT_EQ(o.status, 3) << o.text;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(detos("").status, 2);
  EXPECT_EQ(detos("run no_such_program").status, 2);
  EXPECT_EQ(detos("run hello --scheduler lottery").status, 2);
  EXPECT_EQ(detos("replay hostfiles").status, 2);
  EXPECT_EQ(detos("explore hello --order sideways").status, 2);
}

TEST_F(Cli, IgnoredFaultRunsToCompletion) {
  auto o = detos("run touch --fs none --fault unsupported-syscall=ignore");
  EXPECT_EQ(o.status, 0) << o.text;
}

TEST_F(Cli, StdinFromInputFile) {
  {
    std::ofstream(dir_ / "in.txt") << "piped text";
  }
  auto o = detos("run stdin_echo --input stdin=in.txt");
  EXPECT_EQ(o.status, 0) << o.text;
  EXPECT_TRUE(contains(o.text, "stdin: piped text"));
}

TEST_F(Cli, DumpFsRoundTripsThroughPreload) {
  auto dump = detos("run touch --dump-fs snap");
  ASSERT_EQ(dump.status, 0) << dump.text;
  ASSERT_TRUE(fs::exists(dir_ / "snap" / "manifest"));
  EXPECT_TRUE(contains(slurp(dir_ / "snap" / "manifest"), "touched"));
  auto with = detos("run hello --preload snap/manifest");
  EXPECT_EQ(with.status, 0) << with.text;
}

TEST_F(Cli, SeededRunIsRepeatable) {
  auto a = detos("run interleave2x3 --seed 9 --events a.events");
  auto b = detos("run interleave2x3 --seed 9 --events b.events");
  EXPECT_EQ(a.status, 0);
  EXPECT_EQ(slurp(dir_ / "a.events"), slurp(dir_ / "b.events"));
}

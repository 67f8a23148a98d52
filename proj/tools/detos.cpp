// detos: run, explore, record and replay guest programs on the model OS.
//
// Exit status: 0 clean, 1 verdict (or a non-clean outcome), 2 usage or
// configuration error, 3 replay divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "detos/error.hpp"
#include "detos/explorer.hpp"
#include "detos/hostproxy.hpp"
#include "detos/programs.hpp"
#include "detos/vfs.hpp"

namespace fs = std::filesystem;
using namespace detos;

namespace {

constexpr int kClean = 0;
constexpr int kVerdict = 1;
constexpr int kUsage = 2;
constexpr int kDivergence = 3;

struct Options {
  std::string program;
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::string> faults;
  std::vector<std::string> inputs;
  std::string choices;
  std::string events;
  std::string save_choices;
  std::string dump_fs;
  std::string out_dir = "verdicts";
  std::string order = "asc";
  std::optional<std::uint64_t> seed;
  std::uint64_t budget = 100000;
  unsigned workers = 1;
};

// Registers flags that map straight onto config settings.
void setting_flag(CLI::App* app, Options& o, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.settings.emplace_back(key, v); }, help);
}

void common_flags(CLI::App* app, Options& o) {
  app->add_option("program", o.program, "Program name (see `detos list`)")->required();
  setting_flag(app, o, "--scheduler", "scheduler", "null | sync | async | fair");
  setting_flag(app, o, "--fs", "fs", "vfs | proxy | replay | none");
  setting_flag(app, o, "--clock-mode", "clock.mode", "tick | shift | off");
  setting_flag(app, o, "--quantum-ns", "clock.quantum_ns", "Clock quantum in nanoseconds");
  setting_flag(app, o, "--max-steps", "clock.max_steps", "Largest shift, in quanta");
  setting_flag(app, o, "--trace", "trace", "Syscall trace file");
  setting_flag(app, o, "--preload", "preload", "Filesystem preload manifest");
  setting_flag(app, o, "--max-depth", "max_depth", "Choice log length bound");
  setting_flag(app, o, "--fair-bound", "fair_bound", "Deficit bound of the fair scheduler");
  setting_flag(app, o, "--sandbox", "sandbox", "Host directory the proxy is rooted at");
  setting_flag(app, o, "--input-policy", "input_policy", "strict | zero | enumerate");
  app->add_flag_callback("--inject-alloc-faults", [&o] { o.settings.emplace_back("inject_alloc_faults", "true"); },
                         "Let allocations fail through the choice operator");
  app->add_flag_callback("--host-hook", [&o] { o.settings.emplace_back("host_hook", "true"); },
                         "Enable the host syscall hook");
  app->add_option("--fault", o.faults, "KIND=report|ignore")->take_all();
  app->add_option("--input", o.inputs, "LABEL=FILE binding for the input store")->take_all();
}

Config build_config(const Program& p, const Options& o) {
  Config cfg = p.config;
  for (const auto& [k, v] : o.settings) apply_setting(cfg, k, v);
  for (const auto& f : o.faults) {
    auto eq = f.find('=');
    if (eq == std::string::npos) throw ConfigError("--fault expects KIND=report|ignore, got '" + f + "'");
    apply_setting(cfg, "fault." + f.substr(0, eq), f.substr(eq + 1));
  }
  return cfg;
}

InputStore build_inputs(const Options& o) {
  InputStore store;
  for (const auto& binding : o.inputs) {
    auto eq = binding.find('=');
    if (eq == std::string::npos) throw ConfigError("--input expects LABEL=FILE, got '" + binding + "'");
    std::ifstream in(binding.substr(eq + 1), std::ios::binary);
    if (!in) throw ConfigError("cannot read input file " + binding.substr(eq + 1));
    store.set(binding.substr(0, eq), Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  }
  return store;
}

const Program& find_program(const std::string& name) {
  const auto* p = builtin_programs().find(name);
  if (!p) throw ConfigError("unknown program '" + name + "'; try `detos list`");
  return *p;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

int status_of(const RunResult& r) {
  if (r.diverged()) return kDivergence;
  return r.outcome == Outcome::exited ? kClean : kVerdict;
}

void report(const RunResult& r, const std::string& program) {
  std::cout << std::flush;
  std::cerr << r.console_out << r.console_err;
  std::cerr << "outcome: " << outcome_name(r.outcome);
  if (r.outcome == Outcome::exited) std::cerr << " code=" << r.exit_code;
  if (r.fault) std::cerr << " fault=" << fault_name(*r.fault);
  if (!r.detail.empty()) std::cerr << " (" << r.detail << ")";
  std::cerr << " choices=" << r.choices.size() << " events=" << r.events.size() << '\n';
  for (const auto& leak : r.leaks) std::cerr << "leak: allocation " << leak.id << " (" << leak.size << " bytes)\n";
  if (r.fault && r.fault != FaultKind::replay_divergence)
    std::cerr << "FAULT " << fault_name(*r.fault) << ' ' << program << " choices=" << r.choices.size() << '\n';
}

int cmd_run(const Options& o) {
  const auto& p = find_program(o.program);
  auto cfg = build_config(p, o);
  auto source = ChoiceSource::explorer({});
  if (!o.choices.empty()) source = ChoiceSource::scripted(ChoiceLog::load(o.choices));
  else if (o.seed) source = ChoiceSource::random(*o.seed);

  auto kernel = Kernel::boot(cfg, std::move(source), build_inputs(o));
  auto r = kernel->run(p.main);
  if (o.events.empty()) std::cout << r.events.to_text();
  else write_file(o.events, r.events.to_text());
  if (!o.save_choices.empty()) r.choices.save(o.save_choices);
  if (!o.dump_fs.empty()) {
    if (!kernel->filesystem()) throw ConfigError("--dump-fs needs the vfs provider");
    kernel->filesystem()->dump(o.dump_fs);
  }
  report(r, o.program);
  return status_of(r);
}

int cmd_explore(const Options& o) {
  const auto& p = find_program(o.program);
  auto cfg = build_config(p, o);
  Budget budget{o.budget, cfg.max_depth};
  ExploreOptions opts;
  opts.workers = o.workers;
  if (o.order == "desc") opts.order = SiblingOrder::descending;
  else if (o.order != "asc") throw ConfigError("--order must be asc or desc");

  auto result = explore(p.main, cfg, budget, build_inputs(o), opts);
  if (!o.out_dir.empty() && !result.verdicts.empty()) fs::create_directories(o.out_dir);
  for (std::size_t i = 0; i < result.verdicts.size(); ++i) {
    const auto& v = result.verdicts[i];
    std::cout << v.summary(o.program) << (v.confirmed ? "" : " (did not replay)") << '\n';
    if (!o.out_dir.empty()) {
      auto stem = fs::path(o.out_dir) / ("verdict-" + std::to_string(i));
      v.choices.save(stem.string() + ".choices");
      write_file(stem.string() + ".events", v.events.to_text());
    }
  }
  std::cout << "explored " << result.executions << " executions, " << result.distinct_event_logs
            << " distinct event logs, " << result.verdicts.size() << " verdicts, " << result.depth_bound_hits
            << " depth-bound hits, " << (result.budget_exhausted ? "budget exhausted" : "complete") << '\n';
  return result.verdicts.empty() ? kClean : kVerdict;
}

int cmd_record(const Options& o) {
  const auto& p = find_program(o.program);
  auto cfg = build_config(p, o);
  cfg.fs = FsProvider::proxy;
  cfg.host_hook = true;
  if (!cfg.trace) throw ConfigError("record needs --trace OUT");
  auto out = *cfg.trace;
  cfg.trace.reset();

  auto kernel = Kernel::boot(cfg, ChoiceSource::explorer({}), build_inputs(o));
  auto r = kernel->run(p.main);
  r.trace->save(out);
  if (o.events.empty()) std::cout << r.events.to_text();
  else write_file(o.events, r.events.to_text());
  if (!o.save_choices.empty()) r.choices.save(o.save_choices);
  std::cerr << "recorded " << r.trace->records.size() << " host interactions to " << out.string() << '\n';
  report(r, o.program);
  return status_of(r);
}

int cmd_replay(const Options& o) {
  const auto& p = find_program(o.program);
  auto cfg = build_config(p, o);
  cfg.fs = FsProvider::replay;
  cfg.host_hook = false;
  if (!cfg.trace) throw ConfigError("replay needs --trace IN");
  auto source = ChoiceSource::explorer({});
  if (!o.choices.empty()) source = ChoiceSource::scripted(ChoiceLog::load(o.choices));

  auto kernel = Kernel::boot(cfg, std::move(source), build_inputs(o));
  auto r = kernel->run(p.main);
  if (o.events.empty()) std::cout << r.events.to_text();
  else write_file(o.events, r.events.to_text());
  report(r, o.program);
  std::cerr << "host calls: " << r.host_calls << '\n';
  return status_of(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic model OS: run, explore, record and replay guest programs"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "Run a program once and print its event log");
  common_flags(run, o);
  run->add_option("--choices", o.choices, "Replay this choice log");
  run->add_option("--seed", o.seed, "Take random choices from this seed");
  run->add_option("--events", o.events, "Write the event log here instead of stdout");
  run->add_option("--save-choices", o.save_choices, "Save the choice log taken");
  run->add_option("--dump-fs", o.dump_fs, "Dump the final filesystem as a preload manifest");

  auto* exp = app.add_subcommand("explore", "Enumerate the choice tree and report verdicts");
  common_flags(exp, o);
  exp->add_option("--budget", o.budget, "Maximum executions");
  exp->add_option("--workers", o.workers, "Parallel workers")->check(CLI::PositiveNumber);
  exp->add_option("--order", o.order, "Sibling order: asc | desc");
  exp->add_option("--out", o.out_dir, "Directory for verdict-N.choices/.events (empty: none)");
  exp->add_option("--seed", o.seed, "Accepted for symmetry; exploration is exhaustive");

  auto* rec = app.add_subcommand("record", "Run against the host through the proxy, recording a trace");
  common_flags(rec, o);
  rec->add_option("--events", o.events, "Write the event log here instead of stdout");
  rec->add_option("--save-choices", o.save_choices, "Save the choice log taken");

  auto* rep = app.add_subcommand("replay", "Re-run a program against a recorded trace");
  common_flags(rep, o);
  rep->add_option("--choices", o.choices, "Choice log of the recording run");
  rep->add_option("--events", o.events, "Write the event log here instead of stdout");

  std::string dump_path;
  auto* dump = app.add_subcommand("trace-dump", "Print a trace file as text");
  dump->add_option("file", dump_path, "Trace file")->required();

  auto* list = app.add_subcommand("list", "List the built-in programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kClean : kUsage;
  }

  try {
    if (*run) return cmd_run(o);
    if (*exp) return cmd_explore(o);
    if (*rec) return cmd_record(o);
    if (*rep) return cmd_replay(o);
    if (*dump) {
      std::cout << SyscallTrace::load(dump_path).to_text();
      return kClean;
    }
    if (*list) {
      for (const auto& [name, p] : builtin_programs().all()) std::cout << name << "  " << p.summary << '\n';
      return kClean;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

// Command-line front end: simulate, experiment, verify.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jointsched/jointsched.hpp"

namespace fs = std::filesystem;
using namespace jointsched;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw Error("cannot write " + (dir / name).string());
  return os;
}

void print_checks(const std::vector<CheckResult>& rows, bool& all_ok) {
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(36) << r.name << (r.passed ? "PASS  " : "FAIL  ") << r.detail
              << '\n';
    all_ok = all_ok && r.passed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint eMBB/URLLC scheduling simulator"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run one simulation from a JSON config");
  std::string config_path, out_dir = "out", scheduler = "convex-sa";
  std::uint64_t seed = 1;
  std::size_t slots = 100000;
  bool queue = false;
  sim->add_option("--config", config_path, "system config (JSON)")->required();
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--slots", slots, "number of slots");
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--scheduler", scheduler,
                  "convex-sa | gradient-rp | gradient-random | threshold-tp | static-random | "
                  "static-opportunistic");
  sim->add_flag("--queue", queue, "queue URLLC arrivals FCFS instead of truncating them");

  auto* exp = app.add_subcommand("experiment", "run a preset sweep and write CSV");
  std::string preset_arg;
  std::size_t exp_slots = 10000, exp_seeds = 5;
  exp->add_option("--preset", preset_arg, "convex-vs-rp | threshold | delta-tradeoff | linear-sanity")
      ->required();
  exp->add_option("--out", out_dir, "output directory");
  exp->add_option("--slots", exp_slots, "slots per run");
  exp->add_option("--seeds", exp_seeds, "seeds 1..N");

  auto* ver = app.add_subcommand("verify", "run numerical checks");
  std::string suite = "all";
  ver->add_option("--suite", suite, "theorems | solver | all")
      ->check(CLI::IsMember({"theorems", "solver", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kValidation;
  }

  try {
    if (*sim) {
      SystemConfig cfg;
      try {
        cfg = load_config(config_path);
        require_valid(cfg);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kValidation;
      }
      SchedulerSpec spec;
      try {
        spec.kind = parse_scheduler(scheduler);
      } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
      }
      SimOptions opt;
      opt.slots = slots;
      opt.seed = seed;
      opt.urllc_queue = queue;
      opt.record_slots = true;
      const SimTrace tr = run_simulation(cfg, spec, opt);
      auto csv = open_out(out_dir, "trace.csv");
      write_trace_csv(csv, tr, cfg.num_users);
      auto js = open_out(out_dir, "summary.json");
      js << summary_json(tr.summary).dump(2) << '\n';
      std::cout << "sum_utility " << fmt_num(tr.summary.sum_utility) << "\nwrote "
                << (fs::path(out_dir) / "trace.csv").string() << '\n';
      return kOk;
    }
    if (*exp) {
      Preset p;
      try {
        p = parse_preset(preset_arg);
      } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kValidation;
      }
      if (exp_seeds == 0 || exp_slots == 0) {
        std::cerr << "--slots and --seeds must be positive\n";
        return kValidation;
      }
      if (p == Preset::kLinearSanity) {
        const auto rows = run_linear_sanity(exp->count("--slots") ? exp_slots : 100000, 1);
        auto os = open_out(out_dir, "linear-sanity.csv");
        write_sanity_csv(os, rows);
        write_sanity_csv(std::cout, rows);
        return kOk;
      }
      ExperimentOptions opt;
      opt.slots = exp_slots;
      opt.seeds.clear();
      for (std::size_t s = 1; s <= exp_seeds; ++s) opt.seeds.push_back(s);
      const auto rows = run_experiment(p, opt);
      auto os = open_out(out_dir, preset_name(p) + ".csv");
      write_experiment_csv(os, rows);
      std::cout << "wrote " << rows.size() << " rows to "
                << (fs::path(out_dir) / (preset_name(p) + ".csv")).string() << '\n';
      return kOk;
    }
    if (*ver) {
      bool ok = true;
      if (suite == "theorems" || suite == "all") print_checks(verify_theorems(), ok);
      if (suite == "solver" || suite == "all") print_checks(verify_solver(), ok);
      return ok ? kOk : kRuntime;
    }
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

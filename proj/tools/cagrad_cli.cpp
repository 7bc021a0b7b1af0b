// Command-line front end: reproduce the two-task toy study, run arbitrary
// experiment configs, sweep the conflict parameter c, and run the
// verification suites.
//
// Exit codes: 0 success, 1 runtime or verification failure, 2 usage or
// config error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cagrad/config_json.hpp"
#include "cagrad/harness.hpp"
#include "cagrad/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

cagrad::ExperimentConfig make_toy_config(const std::string& method, double c,
                                         std::uint64_t seed, long steps, double alpha,
                                         const std::string& out_dir) {
  cagrad::ExperimentConfig cfg;
  cfg.problem.builtin = "toy";
  if (method == "gd") {
    cfg.method.method = cagrad::CombineMethod::mean;
  } else if (method == "mgda") {
    cfg.method.method = cagrad::CombineMethod::mgda;
  } else if (method == "pcgrad") {
    cfg.method.method = cagrad::CombineMethod::pcgrad;
  } else if (method == "cagrad") {
    cfg.method.method = cagrad::CombineMethod::cagrad;
    cfg.method.c = c;
  } else {
    throw cagrad::InvalidInputError("unknown method '" + method + "'");
  }
  cfg.stepper.kind = cagrad::StepperKind::adam;
  cfg.stepper.alpha = alpha;
  cfg.steps = steps;
  cfg.inits = cagrad::toy_init_points();
  cfg.seed = seed;
  cfg.log_every = cagrad::kToyDefaultLogEvery;
  cfg.output_path = out_dir;
  return cfg;
}

int report_runs(const cagrad::ExperimentConfig& cfg,
                const std::vector<cagrad::TrajectoryRecord>& records) {
  bool any_diverged = false;
  for (const cagrad::TrajectoryRecord& rec : records) {
    const cagrad::SummaryStats& s = rec.summary;
    if (rec.diverged) {
      std::printf("init %d: diverged at step %ld\n", rec.init_index, rec.diverged_step);
      any_diverged = true;
      continue;
    }
    std::printf("init %d: final L0 %.6g, pareto_stat %.6g, %s\n", rec.init_index,
                s.final_average_loss, s.final_pareto_stat,
                s.converged ? "converged" : (s.stalled ? "stalled" : "in progress"));
  }
  if (!cfg.output_path.empty()) {
    std::printf("trajectories written to %s\n", cfg.output_path.c_str());
  }
  return any_diverged ? kExitRuntime : kExitOk;
}

int cmd_toy(const std::string& method, double c, std::uint64_t seed, long steps,
            double alpha, const std::string& out_dir) {
  const cagrad::ExperimentConfig cfg = make_toy_config(method, c, seed, steps, alpha, out_dir);
  const std::vector<cagrad::TrajectoryRecord> records = cagrad::run_and_write(cfg);
  cagrad::write_json_file(std::filesystem::path(out_dir) / "summary.json",
                          cagrad::experiment_summary_json(cfg, records));
  int stalled = 0;
  int converged = 0;
  for (const cagrad::TrajectoryRecord& rec : records) {
    stalled += rec.summary.stalled ? 1 : 0;
    converged += rec.summary.converged ? 1 : 0;
  }
  const int code = report_runs(cfg, records);
  std::printf("%d of %zu runs converged, %d stalled\n", converged, records.size(), stalled);
  return code;
}

int cmd_run(const std::string& config_path) {
  const cagrad::ExperimentConfig cfg = cagrad::config_from_file(config_path);
  const std::vector<cagrad::TrajectoryRecord> records = cagrad::run_and_write(cfg);
  if (!cfg.output_path.empty()) {
    cagrad::write_json_file(std::filesystem::path(cfg.output_path) / "summary.json",
                            cagrad::experiment_summary_json(cfg, records));
  }
  return report_runs(cfg, records);
}

int cmd_sweep(const std::string& config_path, const std::string& c_list) {
  const cagrad::ExperimentConfig cfg = cagrad::config_from_file(config_path);
  std::vector<double> c_values;
  std::size_t pos = 0;
  while (pos <= c_list.size()) {
    const std::size_t comma = std::min(c_list.find(',', pos), c_list.size());
    const std::string token = c_list.substr(pos, comma - pos);
    if (!token.empty()) {
      try {
        std::size_t used = 0;
        c_values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw cagrad::ConfigError("sweep: bad c value '" + token + "'");
      }
    }
    pos = comma + 1;
  }
  if (c_values.empty()) throw cagrad::ConfigError("sweep: empty c list");
  const std::vector<cagrad::SweepRow> rows = cagrad::sweep_c(cfg, c_values);
  if (!cfg.output_path.empty()) {
    cagrad::write_json_file(std::filesystem::path(cfg.output_path) / "sweep_summary.json",
                            cagrad::sweep_summary_json(cfg, c_values, rows));
    std::printf("sweep summary written to %s\n", cfg.output_path.c_str());
  }
  std::printf("%zu summary rows (%zu c values x %zu inits)\n", rows.size(),
              c_values.size(), cfg.inits.size());
  bool any_diverged = false;
  for (const cagrad::SweepRow& row : rows) any_diverged = any_diverged || row.summary.diverged;
  return any_diverged ? kExitRuntime : kExitOk;
}

int cmd_verify(std::uint64_t seed, long trials, bool corrupt) {
  cagrad::VerifyOptions opt;
  opt.seed = seed;
  opt.trials = trials;
  opt.corrupt_tolerances = corrupt;
  const std::vector<cagrad::PropertyResult> results = cagrad::run_verification(opt);
  bool all_ok = true;
  for (const cagrad::PropertyResult& r : results) {
    std::printf("%s %-24s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all_ok = all_ok && r.passed;
  }
  std::printf("%s\n", all_ok ? "all properties passed" : "some properties FAILED");
  return all_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective gradient-combination toolkit"};
  app.require_subcommand(1);

  // toy
  std::string toy_method;
  double toy_c = -1.0;
  std::uint64_t toy_seed = 0;
  long toy_steps = cagrad::kToyDefaultSteps;
  double toy_lr = cagrad::kToyDefaultAlpha;
  std::string toy_out = "out/toy";
  CLI::App* toy = app.add_subcommand("toy", "Run the two-task toy study from the 5 canonical inits");
  toy->add_option("--method", toy_method, "gd|mgda|pcgrad|cagrad")->required();
  toy->add_option("--c", toy_c, "conflict parameter (cagrad only)");
  toy->add_option("--seed", toy_seed, "rng seed");
  toy->add_option("--steps", toy_steps, "optimization steps");
  toy->add_option("--lr", toy_lr, "stepper learning rate");
  toy->add_option("--out", toy_out, "output directory");

  // run
  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "Run an experiment config (JSON)");
  run->add_option("config", run_config, "path to config file")->required();

  // sweep
  std::string sweep_config;
  std::string sweep_clist;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep the conflict parameter c");
  sweep->add_option("config", sweep_config, "path to config file")->required();
  sweep->add_option("--c-list", sweep_clist, "comma-separated c values")->required();

  // verify
  std::uint64_t verify_seed = 0;
  long verify_trials = 200;
  bool verify_corrupt = false;
  CLI::App* verify = app.add_subcommand("verify", "Run the verification suites");
  verify->add_option("--seed", verify_seed, "rng seed");
  verify->add_option("--trials", verify_trials, "instances per suite");
  verify->add_flag("--corrupt-tolerances", verify_corrupt)->group("");  // test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (toy->parsed()) {
      if (toy_method == "cagrad" && toy_c < 0.0) {
        std::fprintf(stderr, "usage error: --c is required for --method cagrad\n");
        return kExitUsage;
      }
      if (toy_method != "cagrad" && toy_c >= 0.0) {
        std::fprintf(stderr, "usage error: --c only applies to --method cagrad\n");
        return kExitUsage;
      }
      return cmd_toy(toy_method, toy_c, toy_seed, toy_steps, toy_lr, toy_out);
    }
    if (run->parsed()) return cmd_run(run_config);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_clist);
    if (verify->parsed()) {
      if (verify_trials < 1) {
        std::fprintf(stderr, "usage error: --trials must be >= 1\n");
        return kExitUsage;
      }
      return cmd_verify(verify_seed, verify_trials, verify_corrupt);
    }
  } catch (const cagrad::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const cagrad::InvalidInputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

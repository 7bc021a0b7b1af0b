#pragma once

// Experiment orchestration: run a (problem, combiner, stepper) triple from a
// set of initial points, log per-step trajectories and diagnostics, compute
// summary metrics (including the relative performance-drop metric), and
// sweep the conflict parameter c.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cagrad/combiners.hpp"
#include "cagrad/gradcore.hpp"
#include "cagrad/optim.hpp"
#include "cagrad/problems.hpp"
#include "cagrad/rng.hpp"
#include "cagrad/solvers.hpp"

namespace cagrad {

// A run counts as having reached the Pareto set below this stationarity.
inline constexpr double kConvergedParetoThreshold = 1e-2;
// A run counts as stalled above this stationarity at the final step.
inline constexpr double kStallParetoThreshold = 0.1;

// The five canonical starting points of the two-task toy study.
inline const std::vector<ParamVector>& toy_init_points() {
  static const std::vector<ParamVector> kInits = {
      ParamVector{-8.5, 7.5}, ParamVector{-8.5, 5.0}, ParamVector{0.0, 0.0},
      ParamVector{9.0, 9.0},  ParamVector{10.0, -8.0},
  };
  return kInits;
}

// Calibrated toy-study defaults (committed; see configs/toy_default.json).
// At this rate the adaptive stepper leaves gradient descent trapped in the
// steep valley on exactly 2 of the 5 starting points while the conflict-aware
// methods reach the Pareto set from all 5.
inline constexpr double kToyDefaultAlpha = 2e-3;
inline constexpr long kToyDefaultSteps = 100000;
inline constexpr int kToyDefaultLogEvery = 100;

enum class StepperKind { fixed, adam, decaying };

inline std::string to_string(StepperKind k) {
  switch (k) {
    case StepperKind::fixed: return "fixed";
    case StepperKind::adam: return "adam";
    case StepperKind::decaying: return "decaying";
  }
  return "?";
}

struct StepperSpec {
  StepperKind kind = StepperKind::fixed;
  double alpha = 1e-2;  // ignored by the decaying policy
};

// Which landscape to run on: a builtin name with its parameters, or a list
// of DSL expressions.
struct ProblemSpec {
  std::string builtin;                    // "toy" | "quadratic" | "mlp-synth" | ""
  std::vector<std::string> expressions;   // used when builtin is empty
  std::size_t dim = 0;                    // expression problems
  Matrix anchors;                         // quadratic
  std::uint64_t mlp_seed = 1;
  std::size_t mlp_width = 8;
  std::size_t mlp_n = 32;

  std::unique_ptr<Problem> build() const {
    if (builtin == "toy") return toy_two_task();
    if (builtin == "quadratic") return quadratic(anchors);
    if (builtin == "mlp-synth") return mlp_synth(mlp_seed, mlp_width, mlp_n);
    if (builtin.empty() && !expressions.empty()) return from_expressions(expressions, dim);
    throw InvalidInputError("problem: unknown builtin '" + builtin + "'");
  }
};

struct ExperimentConfig {
  ProblemSpec problem;
  CombinerSpec method;
  StepperSpec stepper;
  long steps = 1000;
  std::vector<ParamVector> inits;
  std::uint64_t seed = 0;
  long log_every = 1;
  std::string output_path;

  void validate(const Problem& built) const {
    method.validate();
    if (steps < 1) throw InvalidInputError("config: steps must be >= 1");
    if (log_every < 1) throw InvalidInputError("config: log_every must be >= 1");
    if (inits.empty()) throw InvalidInputError("config: inits must be nonempty");
    for (const ParamVector& init : inits) {
      if (init.dim() != built.dim()) {
        throw InvalidInputError("config: init dimension " + std::to_string(init.dim()) +
                                " does not match problem dimension " +
                                std::to_string(built.dim()));
      }
    }
    if (method.subsample && *method.subsample > static_cast<int>(built.tasks())) {
      throw InvalidInputError("config: subsample exceeds task count");
    }
    if (!(stepper.alpha > 0.0) && stepper.kind != StepperKind::decaying) {
      throw InvalidInputError("config: alpha must be > 0");
    }
    const bool cagrad_family = method.method == CombineMethod::cagrad ||
                               method.method == CombineMethod::cagrad_fast;
    if (stepper.kind == StepperKind::decaying) {
      if (!cagrad_family || !(method.c > 1.0)) {
        throw InvalidInputError("config: decaying stepper requires a cagrad method with c > 1");
      }
      if (!built.lipschitz()) {
        throw InvalidInputError("config: decaying stepper needs a problem with known H");
      }
    }
    // Theorem precondition: fixed-step convergence-mode runs obey alpha <= 1/H.
    if (stepper.kind == StepperKind::fixed && cagrad_family && method.c < 1.0 &&
        built.lipschitz() && stepper.alpha > 1.0 / *built.lipschitz() + 1e-12) {
      throw InvalidInputError("config: fixed-step run with c < 1 requires alpha <= 1/H");
    }
  }
};

struct TrajectoryRow {
  long step = 0;
  std::vector<double> theta;
  std::vector<double> losses;
  double average_loss = 0.0;
  double g0_norm = 0.0;
  double pareto_stat = 0.0;
  double min_dot = 0.0;
  double constraint_norm = 0.0;
};

struct SummaryStats {
  std::vector<double> final_losses;
  double final_average_loss = std::numeric_limits<double>::quiet_NaN();
  double final_pareto_stat = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool stalled = false;
  bool diverged = false;
  long steps_to_converge = -1;  // first logged step at or below the threshold
  double wall_seconds = 0.0;    // in-memory only, never serialized
};

struct TrajectoryRecord {
  int init_index = 0;
  ParamVector init;
  std::vector<TrajectoryRow> rows;
  bool diverged = false;
  long diverged_step = -1;
  SummaryStats summary;
};

namespace detail {

struct RunScratch {
  std::optional<AdamState> adam;
};

inline double recovered_gw_norm(const CombineResult& res) {
  if (!std::isfinite(res.lambda_star)) return 0.0;
  return res.lambda_star * std::sqrt(res.phi);
}

}  // namespace detail

// Executes one (problem, combiner, stepper) run from a single initial point.
// Deterministic given the seed; the rng stream is owned by this run.
inline TrajectoryRecord run_single(const Problem& problem, const ExperimentConfig& cfg,
                                   int init_index) {
  const auto t_start = std::chrono::steady_clock::now();
  TrajectoryRecord rec;
  rec.init_index = init_index;
  rec.init = cfg.inits[static_cast<std::size_t>(init_index)];

  RngStream rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(init_index));
  ParamVector theta = rec.init;
  detail::RunScratch scratch;
  if (cfg.stepper.kind == StepperKind::adam) scratch.adam.emplace(problem.dim());

  const double lipschitz = problem.lipschitz().value_or(0.0);
  double final_pareto = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> final_losses;

  for (long step = 0; step <= cfg.steps; ++step) {
    std::vector<double> losses;
    std::optional<TaskGradients> grads;
    try {
      losses = problem.losses(theta);
      if (!all_finite(losses)) throw EvalDomainError(-1, 0, "non-finite loss");
      grads.emplace(problem.gradients(theta));
    } catch (const EvalDomainError&) {
      rec.diverged = true;
      rec.diverged_step = step;
      break;
    } catch (const InvalidInputError&) {
      // non-finite gradients surface as construction failures
      rec.diverged = true;
      rec.diverged_step = step;
      break;
    }

    const CombineResult res = combine(*grads, cfg.method, rng);
    const bool log_now = step % cfg.log_every == 0;
    const bool last = step == cfg.steps;
    double pareto = std::numeric_limits<double>::quiet_NaN();
    if (log_now || last) {
      pareto = pareto_stationarity(*grads, cfg.method.solver);
    }
    if (log_now) {
      TrajectoryRow row;
      row.step = step;
      row.theta = theta.values;
      row.losses = losses;
      double sum = 0.0;
      for (double l : losses) sum += l;
      row.average_loss = sum / static_cast<double>(losses.size());
      row.g0_norm = norm(grads->g0());
      row.pareto_stat = pareto;
      row.min_dot = res.min_dot;
      row.constraint_norm = res.constraint_norm;
      rec.rows.push_back(std::move(row));
    }
    if (last) {
      final_pareto = pareto;
      final_losses = losses;
      break;
    }

    switch (cfg.stepper.kind) {
      case StepperKind::fixed:
        theta = sgd_step(theta, res.d, cfg.stepper.alpha);
        break;
      case StepperKind::adam:
        theta = adam_step(*scratch.adam, theta, res.d, cfg.stepper.alpha);
        break;
      case StepperKind::decaying: {
        const double g0n = norm(grads->g0());
        const double gwn = detail::recovered_gw_norm(res);
        if (g0n == 0.0 || gwn == 0.0) break;  // Pareto-stationary: halt in place
        const double alpha_t = decaying_step_size(cfg.method.c, lipschitz, g0n, gwn);
        if (alpha_t > 0.0) theta = sgd_step(theta, res.d, alpha_t);
        break;
      }
    }
  }

  SummaryStats& s = rec.summary;
  s.diverged = rec.diverged;
  s.final_losses = final_losses;
  if (!final_losses.empty()) {
    double sum = 0.0;
    for (double l : final_losses) sum += l;
    s.final_average_loss = sum / static_cast<double>(final_losses.size());
  }
  s.final_pareto_stat = final_pareto;
  s.converged = !rec.diverged && std::isfinite(final_pareto) &&
                final_pareto <= kConvergedParetoThreshold;
  s.stalled = rec.diverged || !std::isfinite(final_pareto) ||
              final_pareto > kStallParetoThreshold;
  for (const TrajectoryRow& row : rec.rows) {
    if (row.pareto_stat <= kConvergedParetoThreshold) {
      s.steps_to_converge = row.step;
      break;
    }
  }
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rec;
}

// One trajectory per initial point, sequentially (run order never affects
// results; each run owns its derived rng stream and stepper state).
inline std::vector<TrajectoryRecord> run_experiment(const ExperimentConfig& cfg) {
  const std::unique_ptr<Problem> problem = cfg.problem.build();
  cfg.validate(*problem);
  std::vector<TrajectoryRecord> out;
  out.reserve(cfg.inits.size());
  for (int i = 0; i < static_cast<int>(cfg.inits.size()); ++i) {
    out.push_back(run_single(*problem, cfg, i));
  }
  return out;
}

namespace detail {

inline std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// CSV with header step,theta_1..theta_m,L_1..L_K,L0,g0_norm,pareto_stat,
// min_dot,constraint_norm; floats in shortest round-trip form. The file is
// staged and renamed so readers never observe a partial write.
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const TrajectoryRecord& rec, std::size_t dim,
                                 std::size_t tasks) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << "step";
    for (std::size_t j = 1; j <= dim; ++j) out << ",theta_" << j;
    for (std::size_t i = 1; i <= tasks; ++i) out << ",L_" << i;
    out << ",L0,g0_norm,pareto_stat,min_dot,constraint_norm\n";
    for (const TrajectoryRow& row : rec.rows) {
      out << row.step;
      for (double x : row.theta) out << ',' << detail::shortest(x);
      for (double x : row.losses) out << ',' << detail::shortest(x);
      out << ',' << detail::shortest(row.average_loss)
          << ',' << detail::shortest(row.g0_norm)
          << ',' << detail::shortest(row.pareto_stat)
          << ',' << detail::shortest(row.min_dot)
          << ',' << detail::shortest(row.constraint_norm) << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

// Runs every init and writes <output_path>/run_<init_index>.csv per run.
inline std::vector<TrajectoryRecord> run_and_write(const ExperimentConfig& cfg) {
  std::vector<TrajectoryRecord> records = run_experiment(cfg);
  if (!cfg.output_path.empty()) {
    const std::unique_ptr<Problem> problem = cfg.problem.build();
    std::filesystem::create_directories(cfg.output_path);
    for (const TrajectoryRecord& rec : records) {
      const std::filesystem::path file =
          std::filesystem::path(cfg.output_path) /
          ("run_" + std::to_string(rec.init_index) + ".csv");
      write_trajectory_csv(file, rec, problem->dim(), problem->tasks());
    }
  }
  return records;
}

struct SweepRow {
  double c = 0.0;
  int init_index = 0;
  SummaryStats summary;
};

// Ablation over c for the conflict-averse method. c = 0 rows reproduce the
// mean (GD) rows bit-identically under the same stepper and seed.
inline std::vector<SweepRow> sweep_c(const ExperimentConfig& cfg,
                                     const std::vector<double>& c_values) {
  if (cfg.method.method != CombineMethod::cagrad &&
      cfg.method.method != CombineMethod::cagrad_fast) {
    throw InvalidInputError("sweep_c: method must be a cagrad variant");
  }
  if (c_values.empty()) throw InvalidInputError("sweep_c: no c values");
  std::vector<SweepRow> rows;
  for (double c : c_values) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.method.c = c;
    if (!cfg.output_path.empty()) {
      run_cfg.output_path =
          (std::filesystem::path(cfg.output_path) / ("c_" + detail::shortest(c))).string();
    }
    const std::vector<TrajectoryRecord> recs = run_and_write(run_cfg);
    for (const TrajectoryRecord& rec : recs) {
      rows.push_back(SweepRow{c, rec.init_index, rec.summary});
    }
  }
  return rows;
}

// Average per-task performance drop of a method against a baseline, as a
// percentage: 100/N * sum_i (-1)^{l_i} (M_m,i - M_b,i) / M_b,i with l_i = 1
// where higher is better.
inline double relative_drop(std::span<const double> method_metrics,
                            std::span<const double> baseline_metrics,
                            const std::vector<bool>& higher_better) {
  const std::size_t n = method_metrics.size();
  if (n == 0) throw InvalidInputError("relative_drop: empty metrics");
  if (baseline_metrics.size() != n || higher_better.size() != n) {
    throw InvalidInputError("relative_drop: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (baseline_metrics[i] == 0.0) throw InvalidInputError("relative_drop: zero baseline");
    const double rel = (method_metrics[i] - baseline_metrics[i]) / baseline_metrics[i];
    acc += higher_better[i] ? -rel : rel;
  }
  return 100.0 * acc / static_cast<double>(n);
}

}  // namespace cagrad

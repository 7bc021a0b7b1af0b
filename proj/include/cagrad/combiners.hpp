#pragma once

// The five update-vector constructors behind one interface: given the task
// gradients (and a seeded stream where the method demands one), produce a
// CombineResult.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cagrad/gradcore.hpp"
#include "cagrad/rng.hpp"
#include "cagrad/solvers.hpp"

namespace cagrad {

enum class CombineMethod { mean, mgda, pcgrad, cagrad, cagrad_fast };

inline std::string to_string(CombineMethod m) {
  switch (m) {
    case CombineMethod::mean: return "mean";
    case CombineMethod::mgda: return "mgda";
    case CombineMethod::pcgrad: return "pcgrad";
    case CombineMethod::cagrad: return "cagrad";
    case CombineMethod::cagrad_fast: return "cagrad-fast";
  }
  return "?";
}

// Convergence character of a conflict-averse run as a function of c:
// c < 1 descends to a minimum of the average loss, c >= 1 only promises
// Pareto-stationary fixed points.
enum class GuaranteeMode { average_loss_optimum, pareto_stationary };

struct CombinerSpec {
  CombineMethod method = CombineMethod::mean;
  double c = 0.0;                  // ball radius factor for the cagrad variants
  std::optional<int> subsample;    // |S| for cagrad_fast
  SolverSettings solver;

  GuaranteeMode guarantee_mode() const {
    return c < 1.0 ? GuaranteeMode::average_loss_optimum : GuaranteeMode::pareto_stationary;
  }

  void validate() const {
    solver.validate();
    if (!(c >= 0.0)) throw InvalidInputError("CombinerSpec: c must be >= 0");
    if (subsample && *subsample < 1) throw InvalidInputError("CombinerSpec: subsample < 1");
  }
};

namespace detail {

inline double min_task_dot(const TaskGradients& g, std::span<const double> d) {
  double v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.tasks(); ++i) v = std::min(v, dot(g.row(i), d));
  return v;
}

// Shared conflict-averse kernel over an arbitrary row set (the pseudo rows of
// the subsampled variant included). The ball constraint always uses the true
// g0, per-task diagnostics always use the real task rows.
inline CombineResult cagrad_on_rows(const std::vector<std::span<const double>>& rows,
                                    std::span<const double> g0, double c,
                                    const SolverSettings& s, const TaskGradients& diag) {
  const std::size_t k = rows.size();
  const std::size_t m = g0.size();
  CombineResult res;
  res.phi = c * c * dot(g0, g0);
  res.d.assign(g0.begin(), g0.end());

  if (c == 0.0) {
    // Degenerate ball: the update is exactly the averaged gradient and the
    // linear dual is minimized on the cheapest vertex.
    std::size_t best = 0;
    double best_b = dot(rows[0], g0);
    for (std::size_t i = 1; i < k; ++i) {
      const double bi = dot(rows[i], g0);
      if (bi < best_b) {
        best_b = bi;
        best = i;
      }
    }
    std::vector<double> w(k, 0.0);
    w[best] = 1.0;
    res.weights = SimplexWeights(std::move(w));
    res.lambda_star = kLambdaUnbounded;
    res.dual_value = best_b;
    res.min_dot = min_task_dot(diag, res.d);
    res.constraint_norm = 0.0;
    return res;
  }

  Matrix gram(k, std::vector<double>(k, 0.0));
  std::vector<double> bias(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = dot(rows[i], rows[j]);
      gram[i][j] = v;
      gram[j][i] = v;
    }
    bias[i] = dot(rows[i], g0);
  }

  CagradWeights sol = solve_cagrad_weights(gram, bias, norm(g0), c, s);
  const double sqrt_phi = std::sqrt(res.phi);
  std::vector<double> gw(m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double wi = sol.weights[i];
    const std::span<const double> row = rows[i];
    for (std::size_t j = 0; j < m; ++j) gw[j] += wi * row[j];
  }
  const double gw_norm = norm(gw);

  if (res.phi == 0.0 || gw_norm <= s.zero_eps) {
    // ||g0|| = 0 or the weighted direction degenerates: fall back to d = g0.
    res.lambda_star = kLambdaUnbounded;
  } else {
    const double scale = sqrt_phi / gw_norm;
    for (std::size_t j = 0; j < m; ++j) res.d[j] = g0[j] + scale * gw[j];
    res.lambda_star = sol.lambda_star;
  }
  res.weights = std::move(sol.weights);
  res.dual_value = sol.f_star;
  res.min_dot = min_task_dot(diag, res.d);
  res.constraint_norm = distance(res.d, g0);
  return res;
}

}  // namespace detail

// d = g0, the steepest-descent update on the average loss.
inline CombineResult combine_mean(const TaskGradients& g) {
  CombineResult res;
  res.d = average_gradient(g);
  res.min_dot = detail::min_task_dot(g, res.d);
  res.dual_value = res.min_dot;
  res.constraint_norm = 0.0;
  return res;
}

// d = g_w* for the min-norm weights: the shortest vector in the convex hull
// of the task gradients.
inline CombineResult combine_mgda(const TaskGradients& g, const SolverSettings& s = {}) {
  const GramBias gb = gram_and_bias(g);
  SimplexWeights w = solve_minnorm_weights(gb.gram, s);
  CombineResult res;
  res.d.assign(g.dim(), 0.0);
  for (std::size_t i = 0; i < g.tasks(); ++i) {
    const std::span<const double> row = g.row(i);
    for (std::size_t j = 0; j < g.dim(); ++j) res.d[j] += w[i] * row[j];
  }
  res.weights = std::move(w);
  res.min_dot = detail::min_task_dot(g, res.d);
  res.dual_value = res.min_dot;
  res.constraint_norm = distance(res.d, g.g0());
  return res;
}

// Sequentially projects each task gradient off every other gradient it
// conflicts with (negative running dot), visiting the others in a fresh
// random order per task, then averages the projected rows.
inline CombineResult combine_pcgrad(const TaskGradients& g, RngStream& rng) {
  const std::size_t k = g.tasks();
  const std::size_t m = g.dim();
  std::vector<double> pc(m);
  CombineResult res;
  res.d.assign(m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::span<const double> gi = g.row(i);
    pc.assign(gi.begin(), gi.end());
    const std::vector<int> order = rng.permutation(static_cast<int>(k));
    for (int jj : order) {
      const auto j = static_cast<std::size_t>(jj);
      if (j == i) continue;
      const std::span<const double> gj = g.row(j);
      const double gj_sq = dot(gj, gj);
      if (gj_sq == 0.0) continue;  // zero gradient imposes no conflict
      const double dij = dot(pc, gj);
      if (dij < 0.0) {
        const double scale = dij / gj_sq;
        for (std::size_t t = 0; t < m; ++t) pc[t] -= scale * gj[t];
      }
    }
    for (std::size_t t = 0; t < m; ++t) res.d[t] += pc[t];
  }
  const double inv_k = 1.0 / static_cast<double>(k);
  for (double& x : res.d) x *= inv_k;
  res.min_dot = detail::min_task_dot(g, res.d);
  res.dual_value = res.min_dot;
  res.constraint_norm = distance(res.d, g.g0());
  return res;
}

// d = g0 + (sqrt(phi)/||g_w*||) g_w* with w* from the dual; c = 0 returns
// g0 bit-identically with no solver involved.
inline CombineResult combine_cagrad(const TaskGradients& g, double c,
                                    const SolverSettings& s = {}) {
  s.validate();
  if (!(c >= 0.0)) throw InvalidInputError("combine_cagrad: c must be >= 0");
  std::vector<std::span<const double>> rows(g.tasks());
  for (std::size_t i = 0; i < g.tasks(); ++i) rows[i] = g.row(i);
  return detail::cagrad_on_rows(rows, g.g0(), c, s, g);
}

// Builds the pseudo rows of the subsampled objective: the drawn task rows in
// index order plus one complement row reconstructing the unsampled mass,
// (K g0 - sum_{i in S} g_i) / (K - |S|). |S| = K short-circuits to the full
// row set, reproducing combine_cagrad bit-identically.
inline CombineResult combine_cagrad_fast(const TaskGradients& g, double c, int subsample,
                                         RngStream& rng, const SolverSettings& s = {}) {
  s.validate();
  if (!(c >= 0.0)) throw InvalidInputError("combine_cagrad_fast: c must be >= 0");
  const int k = static_cast<int>(g.tasks());
  if (subsample < 1 || subsample > k) {
    throw InvalidInputError("combine_cagrad_fast: subsample must be in [1, K]");
  }
  const std::vector<int> chosen = rng.sample_without_replacement(k, subsample);

  std::vector<std::span<const double>> rows;
  std::vector<double> complement;
  rows.reserve(static_cast<std::size_t>(subsample) + 1);
  for (int i : chosen) rows.push_back(g.row(static_cast<std::size_t>(i)));
  if (subsample < k) {
    const std::size_t m = g.dim();
    complement.assign(g.g0().begin(), g.g0().end());
    for (double& x : complement) x *= static_cast<double>(k);
    for (int i : chosen) {
      const std::span<const double> row = g.row(static_cast<std::size_t>(i));
      for (std::size_t j = 0; j < m; ++j) complement[j] -= row[j];
    }
    const double inv = 1.0 / static_cast<double>(k - subsample);
    for (double& x : complement) x *= inv;
    rows.push_back(complement);
  }
  return detail::cagrad_on_rows(rows, g.g0(), c, s, g);
}

// Dispatch used by the experiment harness.
inline CombineResult combine(const TaskGradients& g, const CombinerSpec& spec,
                             RngStream& rng) {
  spec.validate();
  switch (spec.method) {
    case CombineMethod::mean: return combine_mean(g);
    case CombineMethod::mgda: return combine_mgda(g, spec.solver);
    case CombineMethod::pcgrad: return combine_pcgrad(g, rng);
    case CombineMethod::cagrad: return combine_cagrad(g, spec.c, spec.solver);
    case CombineMethod::cagrad_fast: {
      const int sub = spec.subsample.value_or(static_cast<int>(g.tasks()));
      return combine_cagrad_fast(g, spec.c, sub, rng, spec.solver);
    }
  }
  throw InvalidInputError("combine: unknown method");
}

}  // namespace cagrad

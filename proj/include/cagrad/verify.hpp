#pragma once

// Verification suites: strong duality against the brute-force primal oracle,
// theorem-level descent inequalities, solver and differentiation properties.
// Used by the `verify` CLI command and by the acceptance tests.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cagrad/combiners.hpp"
#include "cagrad/exprdsl.hpp"
#include "cagrad/gradcore.hpp"
#include "cagrad/harness.hpp"
#include "cagrad/optim.hpp"
#include "cagrad/problems.hpp"
#include "cagrad/rng.hpp"
#include "cagrad/solvers.hpp"

namespace cagrad {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  long trials = 200;
  long oracle_budget = 2001;       // per-axis grid resolution for the primal oracle
  bool corrupt_tolerances = false; // test hook: forces an unattainable tolerance
};

namespace verify_detail {

inline TaskGradients random_pair(RngStream& rng, double scale = 1.0) {
  std::vector<double> flat(4);
  for (double& x : flat) x = rng.next_uniform(-scale, scale);
  return TaskGradients(2, 2, std::move(flat));
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

}  // namespace verify_detail

// |primal_oracle - F(w*)| <= 1e-3 (1 + ||g0||^2) over random two-task planar
// instances and c in {0.2, 0.5, 0.8}; also checks the ball constraint, the
// oracle-dominance bound on min_dot, and the d* reconstruction identity.
inline PropertyResult check_strong_duality(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1001);
  const double tol_scale = opt.corrupt_tolerances ? 1e-12 : 1e-3;
  PropertyResult out{"strong-duality", true, ""};
  long worst_idx = -1;
  double worst_gap = 0.0;
  for (long t = 0; t < opt.trials && out.passed; ++t) {
    const TaskGradients g = verify_detail::random_pair(rng);
    const double g0_sq = dot(g.g0(), g.g0());
    for (double c : {0.2, 0.5, 0.8}) {
      const PrimalOracleResult oracle = primal_oracle(g, c, opt.oracle_budget);
      const CombineResult res = combine_cagrad(g, c);
      const double gap = std::abs(oracle.value - res.dual_value);
      if (gap > worst_gap) {
        worst_gap = gap;
        worst_idx = t;
      }
      if (gap > tol_scale * (1.0 + g0_sq)) {
        out.passed = false;
        out.detail = "duality gap " + verify_detail::fmt(gap) + " at trial " +
                     std::to_string(t) + ", c=" + verify_detail::fmt(c);
        break;
      }
      const double radius = c * std::sqrt(g0_sq);
      if (res.constraint_norm > radius * (1.0 + 1e-9)) {
        out.passed = false;
        out.detail = "ball constraint violated at trial " + std::to_string(t);
        break;
      }
      if (res.min_dot < oracle.value - 1e-3) {
        out.passed = false;
        out.detail = "update is worse than the oracle at trial " + std::to_string(t);
        break;
      }
      // reconstruction: min_i <g_i, d*> equals the dual value
      const double gw_norm =
          std::isfinite(res.lambda_star) ? res.lambda_star * std::sqrt(res.phi) : 0.0;
      if (gw_norm > 1e-12) {
        const double rel = std::abs(res.min_dot - res.dual_value) /
                           std::max(1.0, std::abs(res.dual_value));
        if (rel > 1e-8) {
          out.passed = false;
          out.detail = "d* reconstruction off by " + verify_detail::fmt(rel) +
                       " at trial " + std::to_string(t);
          break;
        }
      }
    }
  }
  if (out.passed) {
    out.detail = "worst gap " + verify_detail::fmt(worst_gap) + " (trial " +
                 std::to_string(worst_idx) + ")";
  }
  return out;
}

// Projection onto the simplex: idempotent, and no random simplex point is
// closer to the input in Euclidean distance.
inline PropertyResult check_simplex_projection(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1002);
  PropertyResult out{"simplex-projection", true, ""};
  for (long t = 0; t < std::max(opt.trials / 10, 5L) && out.passed; ++t) {
    const int k = 2 + static_cast<int>(rng.next_below(5));
    std::vector<double> v(static_cast<std::size_t>(k));
    for (double& x : v) x = rng.next_uniform(-3.0, 3.0);
    const SimplexWeights p = project_to_simplex(v);
    const SimplexWeights p2 = project_to_simplex(p.span());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] != p2[i]) {
        out.passed = false;
        out.detail = "projection is not idempotent";
        break;
      }
    }
    const double best = distance(p.span(), v);
    std::vector<double> q(static_cast<std::size_t>(k));
    for (int s = 0; s < 10000 && out.passed; ++s) {
      // random simplex point via normalized exponentials
      double total = 0.0;
      for (double& x : q) {
        x = -std::log(1.0 - rng.next_unit());
        total += x;
      }
      for (double& x : q) x /= total;
      if (distance(q, v) < best - 1e-12) {
        out.passed = false;
        out.detail = "random simplex point beats the projection";
      }
    }
  }
  return out;
}

// Min-norm weights dominate random simplex points: w* M w* <= w M w.
inline PropertyResult check_minnorm_dominance(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1003);
  PropertyResult out{"minnorm-dominance", true, ""};
  for (long t = 0; t < std::max(opt.trials / 20, 3L) && out.passed; ++t) {
    const int k = 2 + static_cast<int>(rng.next_below(3));
    const int m = 2 + static_cast<int>(rng.next_below(3));
    std::vector<double> flat(static_cast<std::size_t>(k * m));
    for (double& x : flat) x = rng.next_uniform(-1.0, 1.0);
    const TaskGradients g(static_cast<std::size_t>(k), static_cast<std::size_t>(m),
                          std::move(flat));
    const GramBias gb = gram_and_bias(g);
    SolverSettings s;
    s.max_iters = 2000;
    const SimplexWeights w = solve_minnorm_weights(gb.gram, s);
    const double best = detail::quadratic_form(gb.gram, w.span());
    std::vector<double> q(static_cast<std::size_t>(k));
    for (int trial = 0; trial < 1000; ++trial) {
      double total = 0.0;
      for (double& x : q) {
        x = -std::log(1.0 - rng.next_unit());
        total += x;
      }
      for (double& x : q) x /= total;
      if (detail::quadratic_form(gb.gram, q) < best - 1e-9) {
        out.passed = false;
        out.detail = "random weights beat the min-norm solution at trial " + std::to_string(t);
        break;
      }
    }
  }
  return out;
}

// F(t w1 + (1-t) w2) <= t F(w1) + (1-t) F(w2) + 1e-9 on random instances.
inline PropertyResult check_dual_convexity(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1004);
  PropertyResult out{"dual-convexity", true, ""};
  for (long t = 0; t < opt.trials && out.passed; ++t) {
    const int k = 2 + static_cast<int>(rng.next_below(4));
    const int m = 2 + static_cast<int>(rng.next_below(3));
    std::vector<double> flat(static_cast<std::size_t>(k * m));
    for (double& x : flat) x = rng.next_uniform(-1.0, 1.0);
    const TaskGradients g(static_cast<std::size_t>(k), static_cast<std::size_t>(m),
                          std::move(flat));
    const GramBias gb = gram_and_bias(g);
    const double sqrt_phi = rng.next_uniform(0.0, 1.0) * norm(g.g0());
    auto rand_w = [&] {
      std::vector<double> q(static_cast<std::size_t>(k));
      double total = 0.0;
      for (double& x : q) {
        x = -std::log(1.0 - rng.next_unit());
        total += x;
      }
      for (double& x : q) x /= total;
      return q;
    };
    const std::vector<double> w1 = rand_w();
    const std::vector<double> w2 = rand_w();
    const double tt = rng.next_unit();
    std::vector<double> mix(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = tt * w1[i] + (1.0 - tt) * w2[i];
    const double lhs = cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, mix);
    const double rhs = tt * cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, w1) +
                       (1.0 - tt) * cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, w2);
    if (lhs > rhs + 1e-9) {
      out.passed = false;
      out.detail = "convexity violated by " + verify_detail::fmt(lhs - rhs);
    }
  }
  return out;
}

// Averaging identities: linearity of the average, w^T M w = ||g_w||^2, and
// conflict_measure(g, g0) <= 0 whenever no pair of gradients conflicts.
inline PropertyResult check_gradcore_identities(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1005);
  PropertyResult out{"gradcore-identities", true, ""};
  for (long t = 0; t < opt.trials && out.passed; ++t) {
    const std::size_t k = 2 + rng.next_below(3);
    const std::size_t m = 2 + rng.next_below(4);
    std::vector<double> f1(k * m), f2(k * m);
    for (double& x : f1) x = rng.next_uniform(-1.0, 1.0);
    for (double& x : f2) x = rng.next_uniform(-1.0, 1.0);
    const double a = rng.next_uniform(-2.0, 2.0);
    const double b = rng.next_uniform(-2.0, 2.0);
    std::vector<double> mix(k * m);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f1[i] + b * f2[i];
    const TaskGradients g1(k, m, f1), g2(k, m, f2), gm(k, m, mix);
    for (std::size_t j = 0; j < m; ++j) {
      const double want = a * g1.g0()[j] + b * g2.g0()[j];
      if (std::abs(gm.g0()[j] - want) > 1e-12 * (1.0 + std::abs(want))) {
        out.passed = false;
        out.detail = "average is not linear";
        break;
      }
    }
    // w^T M w vs ||g_w||^2
    const GramBias gb = gram_and_bias(g1);
    std::vector<double> w(k);
    double total = 0.0;
    for (double& x : w) {
      x = -std::log(1.0 - rng.next_unit());
      total += x;
    }
    for (double& x : w) x /= total;
    std::vector<double> gw(m, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < m; ++j) gw[j] += w[i] * g1.row(i)[j];
    }
    const double lhs = detail::quadratic_form(gb.gram, w);
    const double rhs = dot(gw, gw);
    if (std::abs(lhs - rhs) > 1e-9 * (1.0 + rhs)) {
      out.passed = false;
      out.detail = "w^T M w mismatch " + verify_detail::fmt(std::abs(lhs - rhs));
    }
    // no-conflict instance: nonnegative entries force pairwise dots >= 0
    std::vector<double> pos(k * m);
    for (double& x : pos) x = rng.next_uniform(0.0, 1.0);
    const TaskGradients gp(k, m, std::move(pos));
    if (conflict_measure(gp, gp.g0()) > 0.0) {
      out.passed = false;
      out.detail = "conflict positive despite aligned gradients";
    }
  }
  return out;
}

// Forward-mode derivatives match central finite differences on random DSL
// trees at points with a safe nonsmoothness margin.
inline PropertyResult check_forward_mode(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1006);
  PropertyResult out{"forward-mode-vs-fd", true, ""};
  const std::size_t dim = 3;

  // Random expression text; log/sqrt/div arguments get a positive offset so
  // the tree stays defined on the sampled box.
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth <= 0 || rng.next_below(5) == 0) {
      if (rng.next_below(2) == 0) {
        return "x" + std::to_string(1 + rng.next_below(dim));
      }
      return verify_detail::fmt(rng.next_uniform(0.25, 2.0));
    }
    switch (rng.next_below(10)) {
      case 0: return "-(" + gen(depth - 1) + ")";
      case 1: return "tanh(" + gen(depth - 1) + ")";
      case 2: return "exp(0.3*(" + gen(depth - 1) + "))";
      case 3: return "abs(" + gen(depth - 1) + ")";
      case 4: return "log(0.5 + abs(" + gen(depth - 1) + "))";
      case 5: return "sqrt(0.5 + abs(" + gen(depth - 1) + "))";
      case 6: return "(" + gen(depth - 1) + ") + (" + gen(depth - 1) + ")";
      case 7: return "(" + gen(depth - 1) + ") * (" + gen(depth - 1) + ")";
      case 8: return "(" + gen(depth - 1) + ") / (0.5 + abs(" + gen(depth - 1) + "))";
      default:
        if (rng.next_below(2) == 0) {
          return "max(" + gen(depth - 1) + ", " + gen(depth - 1) + ")";
        }
        return "(" + gen(depth - 1) + ")^2";
    }
  };

  long checked = 0;
  const long wanted = std::max(5 * opt.trials, 100L);
  for (long attempt = 0; attempt < 20 * wanted && checked < wanted && out.passed; ++attempt) {
    const std::string text = gen(4);
    ExprAst ast;
    try {
      ast = parse(text);
    } catch (const ParseError&) {
      out.passed = false;
      out.detail = "generator produced unparsable text: " + text;
      break;
    }
    std::vector<double> p(dim);
    for (double& x : p) x = rng.next_uniform(-2.0, 2.0);
    const ParamVector theta(p);
    try {
      if (nonsmooth_margin(ast, theta) < 1e-3) continue;
      const DualValue dv = eval_dual(ast, theta);
      if (!std::isfinite(dv.value) || std::abs(dv.value) > 1e6) continue;
      bool usable = true;
      for (std::size_t i = 0; i < dim && usable; ++i) {
        usable = std::isfinite(dv.tangents[i]) && std::abs(dv.tangents[i]) < 1e6;
      }
      if (!usable) continue;
      for (std::size_t i = 0; i < dim; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(theta[i]));
        ParamVector lo = theta, hi = theta;
        lo[i] -= h;
        hi[i] += h;
        const double fd = (eval(ast, hi) - eval(ast, lo)) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(dv.tangents[i])});
        if (std::abs(fd - dv.tangents[i]) > 1e-5 * scale) {
          out.passed = false;
          out.detail = "derivative mismatch on " + text + " (coordinate " +
                       std::to_string(i + 1) + ")";
          break;
        }
      }
      ++checked;
    } catch (const EvalDomainError&) {
      continue;
    }
  }
  if (out.passed && checked < wanted) {
    out.passed = false;
    out.detail = "only " + std::to_string(checked) + " usable instances";
  }
  if (out.passed) out.detail = std::to_string(checked) + " trees checked";
  return out;
}

// Per-step descent inequality and the telescoped gradient-norm bound for
// fixed-step runs with c < 1 on random quadratic landscapes.
inline PropertyResult check_descent_inequality(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1007);
  PropertyResult out{"descent-inequality", true, ""};
  for (long t = 0; t < std::max(opt.trials / 10, 5L) && out.passed; ++t) {
    const std::size_t k = 2 + rng.next_below(2);
    const std::size_t m = 2;
    Matrix anchors(k, std::vector<double>(m));
    for (auto& a : anchors) {
      for (double& x : a) x = rng.next_uniform(-2.0, 2.0);
    }
    const QuadraticProblem prob(anchors);
    const double c = rng.next_uniform(0.0, 0.9);
    const double alpha = 1.0;  // = 1/H
    ParamVector theta{rng.next_uniform(-4.0, 4.0), rng.next_uniform(-4.0, 4.0)};
    const double l0_start = [&] {
      const std::vector<double> l = prob.losses(theta);
      double s = 0.0;
      for (double x : l) s += x;
      return s / static_cast<double>(l.size());
    }();
    double grad_sq_sum = 0.0;
    for (int step = 0; step < 50 && out.passed; ++step) {
      const TaskGradients g = prob.gradients(theta);
      const double g0_sq = dot(g.g0(), g.g0());
      grad_sq_sum += g0_sq;
      const CombineResult res = combine_cagrad(g, c);
      const ParamVector next = sgd_step(theta, res.d, alpha);
      const auto l0 = [&](const ParamVector& th) {
        const std::vector<double> l = prob.losses(th);
        double s = 0.0;
        for (double x : l) s += x;
        return s / static_cast<double>(l.size());
      };
      if (l0(next) - l0(theta) > -(alpha / 2.0) * (1.0 - c * c) * g0_sq + 1e-10) {
        out.passed = false;
        out.detail = "per-step descent inequality violated at trial " + std::to_string(t);
      }
      theta = next;
    }
    const double bound =
        2.0 * (l0_start - *prob.average_loss_optimum()) / (alpha * (1.0 - c * c));
    if (grad_sq_sum > bound + 1e-8) {
      out.passed = false;
      out.detail = "telescoped bound violated: " + verify_detail::fmt(grad_sq_sum) + " > " +
                   verify_detail::fmt(bound);
    }
  }
  return out;
}

// Decaying-step regime (c = 2): sum_t alpha_t ||g0|| ||g_w*|| stays below
// 2 min_i (L_i(theta_0) - L_i(theta_T)) / (c - 1). The step is capped at
// ||g_w*|| / (H c ||g0||), the largest value for which the curvature term of
// the smoothness bound stays dominated; the looser (c - 1) denominator makes
// individual losses increase (see the decisions record for a counterexample),
// which the faithful acceptance criterion 6 exhibits.
inline PropertyResult check_decaying_step_bound(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1008);
  PropertyResult out{"decaying-step-bound", true, ""};
  for (long t = 0; t < std::max(opt.trials / 20, 3L) && out.passed; ++t) {
    Matrix anchors = {{rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0)},
                      {rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0)}};
    const QuadraticProblem prob(anchors);
    const double c = 2.0;
    const double lipschitz = *prob.lipschitz();
    ParamVector theta{rng.next_uniform(-4.0, 4.0), rng.next_uniform(-4.0, 4.0)};
    const std::vector<double> losses_start = prob.losses(theta);
    double lhs = 0.0;
    for (int step = 0; step < 200; ++step) {
      const TaskGradients g = prob.gradients(theta);
      const double g0n = norm(g.g0());
      if (g0n == 0.0) break;
      const CombineResult res = combine_cagrad(g, c);
      const double gwn =
          std::isfinite(res.lambda_star) ? res.lambda_star * std::sqrt(res.phi) : 0.0;
      if (gwn == 0.0) break;
      const double alpha_t = gwn / (lipschitz * c * g0n);
      lhs += alpha_t * g0n * gwn;
      theta = sgd_step(theta, res.d, alpha_t);
    }
    const std::vector<double> losses_end = prob.losses(theta);
    double min_drop = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < losses_start.size(); ++i) {
      min_drop = std::min(min_drop, losses_start[i] - losses_end[i]);
    }
    const double rhs = 2.0 * min_drop / (c - 1.0) + 1e-8;
    if (lhs > rhs) {
      out.passed = false;
      out.detail = "bound violated: " + verify_detail::fmt(lhs) + " > " +
                   verify_detail::fmt(rhs);
    }
  }
  if (out.passed) out.detail = "step capped at ||g_w||/(H c ||g0||)";
  return out;
}

// |S| = K reproduces the full method bit-for-bit; subsampled updates stay in
// the ball.
inline PropertyResult check_subsample_consistency(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1009);
  PropertyResult out{"subsample-consistency", true, ""};
  for (long t = 0; t < std::max(opt.trials / 4, 10L) && out.passed; ++t) {
    const std::size_t k = 2 + rng.next_below(4);
    const std::size_t m = 2 + rng.next_below(4);
    std::vector<double> flat(k * m);
    for (double& x : flat) x = rng.next_uniform(-1.0, 1.0);
    const TaskGradients g(k, m, std::move(flat));
    const double c = rng.next_uniform(0.1, 0.9);

    RngStream draw = derive_stream(opt.seed, 5000 + static_cast<std::uint64_t>(t));
    const CombineResult full = combine_cagrad(g, c);
    const CombineResult same = combine_cagrad_fast(g, c, static_cast<int>(k), draw);
    for (std::size_t j = 0; j < m; ++j) {
      if (full.d[j] != same.d[j]) {
        out.passed = false;
        out.detail = "|S| = K is not bit-identical to the full method";
        break;
      }
    }
    const int sub = 1 + static_cast<int>(rng.next_below(k));
    RngStream draw2 = derive_stream(opt.seed, 6000 + static_cast<std::uint64_t>(t));
    const CombineResult fast = combine_cagrad_fast(g, c, sub, draw2);
    if (fast.constraint_norm > c * norm(g.g0()) * (1.0 + 1e-9)) {
      out.passed = false;
      out.detail = "subsampled update left the ball";
    }
  }
  return out;
}

// Positive homogeneity: scaling every gradient by s > 0 scales the update by
// s for the mean, min-norm, and conflict-averse combiners. Two-task instances
// go through the exact 1-D path and are held to 1e-9; K = 3 instances go
// through projected gradient descent, whose argmin localization is limited to
// about sqrt(machine eps), so they get a matching looser tolerance.
inline PropertyResult check_scale_equivariance(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1010);
  PropertyResult out{"scale-equivariance", true, ""};
  SolverSettings tight;
  tight.max_iters = 20000;
  tight.tol = 1e-16;
  for (long t = 0; t < std::max(opt.trials / 4, 10L) && out.passed; ++t) {
    const std::size_t k = 2 + rng.next_below(2);
    const std::size_t m = 2 + rng.next_below(3);
    const double tol = k == 2 ? 1e-9 : 1e-5;
    std::vector<double> flat(k * m);
    for (double& x : flat) x = rng.next_uniform(-1.0, 1.0);
    const double s = std::exp(rng.next_uniform(-2.0, 2.0));
    std::vector<double> scaled(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) scaled[i] = s * flat[i];
    const TaskGradients g(k, m, std::move(flat));
    const TaskGradients gs(k, m, std::move(scaled));
    // Near Pareto-stationary instances the normalized g_w direction is
    // ill-conditioned, so the scaled run through the iterative K = 3 solver
    // cannot reproduce it to useful precision; skip those.
    if (k == 3 && pareto_stationarity(g, tight) < 0.05) continue;
    const double c = rng.next_uniform(0.1, 0.9);
    const std::vector<std::pair<CombineResult, CombineResult>> pairs = {
        {combine_mean(g), combine_mean(gs)},
        {combine_mgda(g, tight), combine_mgda(gs, tight)},
        {combine_cagrad(g, c, tight), combine_cagrad(gs, c, tight)},
    };
    for (const auto& [base, scl] : pairs) {
      for (std::size_t j = 0; j < m; ++j) {
        const double want = s * base.d[j];
        if (std::abs(scl.d[j] - want) > tol * (1.0 + std::abs(want))) {
          out.passed = false;
          out.detail = "direction is not 1-homogeneous (scale " +
                       verify_detail::fmt(s) + ", K = " + std::to_string(k) + ")";
          break;
        }
      }
    }
  }
  return out;
}

// Two-task projection: the result is independent of the random ordering and
// each projected gradient has nonnegative dot with the other task.
inline PropertyResult check_pcgrad_two_task(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1011);
  PropertyResult out{"pcgrad-two-task", true, ""};
  for (long t = 0; t < opt.trials && out.passed; ++t) {
    const TaskGradients g = verify_detail::random_pair(rng, 2.0);
    RngStream s1 = derive_stream(opt.seed, 7000 + static_cast<std::uint64_t>(t));
    RngStream s2 = derive_stream(opt.seed, 8000 + static_cast<std::uint64_t>(t));
    const CombineResult a = combine_pcgrad(g, s1);
    const CombineResult b = combine_pcgrad(g, s2);
    for (std::size_t j = 0; j < g.dim(); ++j) {
      if (a.d[j] != b.d[j]) {
        out.passed = false;
        out.detail = "two-task result depends on the rng draw";
        break;
      }
    }
    // hand-projected rows (two tasks need no ordering)
    auto project_off = [&](std::span<const double> gi, std::span<const double> gj) {
      std::vector<double> pc(gi.begin(), gi.end());
      const double den = dot(gj, gj);
      if (den > 0.0) {
        const double num = dot(pc, gj);
        if (num < 0.0) {
          for (std::size_t j = 0; j < pc.size(); ++j) pc[j] -= (num / den) * gj[j];
        }
      }
      return pc;
    };
    const std::vector<double> pc1 = project_off(g.row(0), g.row(1));
    const std::vector<double> pc2 = project_off(g.row(1), g.row(0));
    if (dot(pc1, g.row(1)) < -1e-12 || dot(pc2, g.row(0)) < -1e-12) {
      out.passed = false;
      out.detail = "projected gradient still conflicts";
    }
    for (std::size_t j = 0; j < g.dim(); ++j) {
      const double want = 0.5 * (pc1[j] + pc2[j]);
      if (std::abs(a.d[j] - want) > 1e-12 * (1.0 + std::abs(want))) {
        out.passed = false;
        out.detail = "two-task update differs from the hand formula";
        break;
      }
    }
  }
  return out;
}

// c -> infinity limit: with c = 100 the conflict-averse direction aligns with
// the min-norm direction away from the Pareto set.
inline PropertyResult check_mgda_limit(const VerifyOptions& opt) {
  RngStream rng = derive_stream(opt.seed, 1012);
  PropertyResult out{"mgda-limit", true, ""};
  const std::unique_ptr<Problem> toy = toy_two_task();
  long checked = 0;
  double worst = 1.0;
  for (long attempt = 0; attempt < 100000 && checked < 100; ++attempt) {
    const ParamVector theta{rng.next_uniform(-10.0, 10.0), rng.next_uniform(-10.0, 10.0)};
    TaskGradients g = toy->gradients(theta);
    if (pareto_stationarity(g) <= 0.05) continue;
    const CombineResult wide = combine_cagrad(g, 100.0);
    const CombineResult mn = combine_mgda(g);
    const double cs = verify_detail::cosine(wide.d, mn.d);
    worst = std::min(worst, cs);
    ++checked;
    if (cs < 0.99) {
      out.passed = false;
      out.detail = "cosine " + verify_detail::fmt(cs) + " at theta = (" +
                   verify_detail::fmt(theta[0]) + ", " + verify_detail::fmt(theta[1]) + ")";
      break;
    }
  }
  if (out.passed && checked < 100) {
    out.passed = false;
    out.detail = "could not collect 100 sample points";
  }
  if (out.passed) out.detail = "worst cosine " + verify_detail::fmt(worst);
  return out;
}

inline std::vector<PropertyResult> run_verification(const VerifyOptions& opt) {
  if (opt.trials < 1) throw InvalidInputError("verify: trials must be >= 1");
  std::vector<PropertyResult> results;
  results.push_back(check_strong_duality(opt));
  results.push_back(check_simplex_projection(opt));
  results.push_back(check_minnorm_dominance(opt));
  results.push_back(check_dual_convexity(opt));
  results.push_back(check_gradcore_identities(opt));
  results.push_back(check_forward_mode(opt));
  results.push_back(check_descent_inequality(opt));
  results.push_back(check_decaying_step_bound(opt));
  results.push_back(check_subsample_consistency(opt));
  results.push_back(check_scale_equivariance(opt));
  results.push_back(check_pcgrad_two_task(opt));
  results.push_back(check_mgda_limit(opt));
  return results;
}

}  // namespace cagrad

#pragma once

// Simplex-constrained solvers: Euclidean projection onto the probability
// simplex, the conflict-averse dual minimizer, the min-norm (MGDA) weights,
// the Pareto-stationarity measure, and a brute-force primal oracle used for
// verification.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "cagrad/gradcore.hpp"
#include "cagrad/rng.hpp"

namespace cagrad {

struct SolverSettings {
  int max_iters = 200;     // projected-gradient iterations
  double tol = 1e-10;      // stop when the objective decrease falls below this
  double step = 0.0;       // initial step; 0 selects 1/trace(M)
  double zero_eps = 1e-12; // threshold below which ||g_w|| counts as zero

  void validate() const {
    if (max_iters < 1) throw InvalidInputError("SolverSettings: max_iters < 1");
    if (!(tol > 0.0)) throw InvalidInputError("SolverSettings: tol must be > 0");
    if (!(zero_eps > 0.0)) throw InvalidInputError("SolverSettings: zero_eps must be > 0");
  }
};

namespace detail {

// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi sweeps.
// K is tiny here (task count), so the O(K^3) cost is irrelevant.
inline double min_symmetric_eigenvalue(Matrix a) {
  const std::size_t n = a.size();
  if (n == 1) return a[0][0];
  for (int sweep = 0; sweep < 40; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
      }
    }
  }
  double mn = a[0][0];
  for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, a[i][i]);
  return mn;
}

inline void validate_gram(const Matrix& m) {
  const std::size_t k = m.size();
  if (k == 0) throw InvalidInputError("gram matrix: empty");
  double scale = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (m[i].size() != k) throw InvalidInputError("gram matrix: not square");
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(m[i][j])) throw InvalidInputError("gram matrix: non-finite entry");
      scale = std::max(scale, std::abs(m[i][j]));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::abs(m[i][j] - m[j][i]) > 1e-10 * scale) {
        throw NumericalDegeneracyError("gram matrix: not symmetric");
      }
    }
  }
  if (min_symmetric_eigenvalue(m) < -1e-9 * scale) {
    throw NumericalDegeneracyError("gram matrix: not positive semidefinite");
  }
}

inline double quadratic_form(const Matrix& m, std::span<const double> w) {
  double q = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double mi = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) mi += m[i][j] * w[j];
    q += mi * w[i];
  }
  return std::max(q, 0.0);
}

}  // namespace detail

// Euclidean projection onto the probability simplex (sort-based). Points
// already on the simplex are returned untouched, making the map exactly
// idempotent.
inline SimplexWeights project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidInputError("project_to_simplex: empty input");
  if (!all_finite(v)) throw InvalidInputError("project_to_simplex: non-finite entry");

  double sum = 0.0;
  bool nonneg = true;
  for (double x : v) {
    sum += x;
    nonneg = nonneg && x >= 0.0;
  }
  if (nonneg && std::abs(sum - 1.0) <= 1e-12) {
    return SimplexWeights(std::vector<double>(v.begin(), v.end()));
  }

  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  std::vector<double> out(v.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i] - tau, 0.0);
    mass += out[i];
  }
  // mass == 1 up to rounding; renormalize so the simplex invariant holds exactly.
  for (double& x : out) x /= mass;
  return SimplexWeights(std::move(out));
}

namespace detail {

// Projected gradient descent over the simplex with step halving on
// non-decrease. Deterministic: fixed uniform start, no randomization.
inline std::vector<double> pgd_minimize(
    std::size_t k, const std::function<double(std::span<const double>)>& f,
    const std::function<std::vector<double>(std::span<const double>)>& grad,
    const SolverSettings& s, double step0) {
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  double fw = f(w);
  double step = step0;
  for (int it = 0; it < s.max_iters; ++it) {
    const std::vector<double> gw = grad(w);
    double t = step;
    std::vector<double> best;
    double fb = fw;
    bool moved = false;
    std::vector<double> cand(k);
    while (t > 1e-20) {
      for (std::size_t i = 0; i < k; ++i) cand[i] = w[i] - t * gw[i];
      const SimplexWeights proj = project_to_simplex(cand);
      const double fc = f(proj.span());
      if (fc < fb) {
        best.assign(proj.span().begin(), proj.span().end());
        fb = fc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    const double decrease = fw - fb;
    w = std::move(best);
    fw = fb;
    step = 2.0 * t;
    if (decrease < s.tol) break;
  }
  return w;
}

}  // namespace detail

// Minimizer of ||g_w||^2 = w^T M w over the simplex. K = 2 uses the exact
// closed-form 1-D quadratic minimizer clipped to [0, 1]; larger K uses
// projected gradient descent.
inline SimplexWeights solve_minnorm_weights(const Matrix& m, const SolverSettings& s = {}) {
  s.validate();
  detail::validate_gram(m);
  const std::size_t k = m.size();
  if (k == 1) return SimplexWeights({1.0});
  if (k == 2) {
    const double denom = m[0][0] - 2.0 * m[0][1] + m[1][1];  // = ||g1 - g2||^2
    double w0;
    if (denom <= 0.0) {
      w0 = 0.5;  // identical rows: every w attains the same value
    } else {
      w0 = std::clamp((m[1][1] - m[0][1]) / denom, 0.0, 1.0);
    }
    return SimplexWeights({w0, 1.0 - w0});
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i) trace += m[i][i];
  const double step0 = s.step > 0.0 ? s.step : 1.0 / std::max(trace, 1e-300);
  auto f = [&](std::span<const double> w) { return detail::quadratic_form(m, w); };
  auto grad = [&](std::span<const double> w) {
    std::vector<double> g(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < k; ++j) gi += m[i][j] * w[j];
      g[i] = 2.0 * gi;
    }
    return g;
  };
  return SimplexWeights(detail::pgd_minimize(k, f, grad, s, step0));
}

struct CagradWeights {
  SimplexWeights weights;
  double lambda_star = 0.0;  // ||g_w*|| / sqrt(phi); kLambdaUnbounded when phi = 0
  double f_star = 0.0;       // F(w*) = b.w* + sqrt(phi) ||g_w*||
};

// Dual objective F(w) = g_w.g0 + sqrt(phi) ||g_w|| expressed through the
// gram matrix and bias vector.
inline double cagrad_dual_objective(const Matrix& m, std::span<const double> b,
                                    double sqrt_phi, std::span<const double> w) {
  double lin = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) lin += b[i] * w[i];
  return lin + sqrt_phi * std::sqrt(detail::quadratic_form(m, w));
}

// Minimizes F(w) over the simplex.
//  - phi = 0 (c = 0 or g0 = 0): F is linear, the minimum sits on the vertex
//    of the smallest bias entry (ties break to the lowest task index).
//  - K = 2: ternary search on the segment (F is convex along it).
//  - K >= 3: projected gradient descent with the subgradient convention that
//    the norm term is dropped where ||g_w|| = 0.
inline CagradWeights solve_cagrad_weights(const Matrix& m, std::span<const double> b,
                                          double g0_norm, double c,
                                          const SolverSettings& s = {}) {
  s.validate();
  if (!(c >= 0.0)) throw InvalidInputError("solve_cagrad_weights: c must be >= 0");
  if (!(g0_norm >= 0.0)) throw InvalidInputError("solve_cagrad_weights: g0_norm must be >= 0");
  detail::validate_gram(m);
  const std::size_t k = m.size();
  if (b.size() != k) throw InvalidInputError("solve_cagrad_weights: bias size mismatch");

  const double phi = c * c * g0_norm * g0_norm;
  const double sqrt_phi = c * g0_norm;

  if (phi == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (b[i] < b[best]) best = i;
    }
    std::vector<double> w(k, 0.0);
    w[best] = 1.0;
    return CagradWeights{SimplexWeights(std::move(w)), kLambdaUnbounded, b[best]};
  }

  std::vector<double> w;
  if (k == 1) {
    w = {1.0};
  } else if (k == 2) {
    // Sign bisection on dF/dw1 along w = (t, 1-t). Value-based search cannot
    // localize the argmin below sqrt(machine eps); the derivative sign can.
    const double qa = m[0][0] - 2.0 * m[0][1] + m[1][1];
    const double qb = 2.0 * (m[0][1] - m[1][1]);
    const double qc = m[1][1];
    const double beta = b[0] - b[1];
    auto dF = [&](double t) {
      const double q = std::max(qa * t * t + qb * t + qc, 0.0);
      const double qp = 2.0 * qa * t + qb;
      if (q <= 0.0) return beta;  // norm kink: drop the norm term
      return beta + sqrt_phi * qp / (2.0 * std::sqrt(q));
    };
    double w0;
    if (dF(0.0) >= 0.0) {
      w0 = 0.0;  // F nondecreasing on the whole segment
    } else if (dF(1.0) <= 0.0) {
      w0 = 1.0;
    } else {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dF(mid) < 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      w0 = 0.5 * (lo + hi);
    }
    w = {w0, 1.0 - w0};
  } else {
    double trace = 0.0;
    for (std::size_t i = 0; i < k; ++i) trace += m[i][i];
    const double step0 = s.step > 0.0 ? s.step : 1.0 / std::max(trace, 1e-300);
    auto f = [&](std::span<const double> ws) {
      return cagrad_dual_objective(m, b, sqrt_phi, ws);
    };
    auto grad = [&](std::span<const double> ws) {
      std::vector<double> g(k);
      const double q = detail::quadratic_form(m, ws);
      const double nrm = std::sqrt(q);
      for (std::size_t i = 0; i < k; ++i) {
        double mi = 0.0;
        for (std::size_t j = 0; j < k; ++j) mi += m[i][j] * ws[j];
        g[i] = b[i] + (nrm > s.zero_eps ? sqrt_phi * mi / nrm : 0.0);
      }
      return g;
    };
    w = detail::pgd_minimize(k, f, grad, s, step0);
  }

  const double gw_norm = std::sqrt(detail::quadratic_form(m, w));
  const double f_star = cagrad_dual_objective(m, b, sqrt_phi, w);
  return CagradWeights{SimplexWeights(std::move(w)), gw_norm / sqrt_phi, f_star};
}

// min over simplex weights of ||g_w||; zero (within tolerance) iff the origin
// lies in the convex hull of the task gradients.
inline double pareto_stationarity(const TaskGradients& g, const SolverSettings& s = {}) {
  const GramBias gb = gram_and_bias(g);
  const SimplexWeights w = solve_minnorm_weights(gb.gram, s);
  return std::sqrt(detail::quadratic_form(gb.gram, w.span()));
}

struct PrimalOracleResult {
  std::vector<double> d;
  double value = 0.0;  // min_i <g_i, d> at the best feasible point found
};

// Brute-force search for max_d min_i <g_i, d> over the ball ||d - g0|| <=
// c ||g0||. Dimensions up to 3 use an axis-aligned grid, budget points per
// axis (nested refinements of a budget are supersets, so the value cannot
// decrease along a chain budget -> 2*budget-1). Higher dimensions fall back
// to deterministic random search with budget samples; sample prefixes nest,
// so there the value is nondecreasing in budget for any pair.
inline PrimalOracleResult primal_oracle(const TaskGradients& g, double c, long budget) {
  if (budget < 1) throw InvalidInputError("primal_oracle: budget < 1");
  if (!(c >= 0.0)) throw InvalidInputError("primal_oracle: c must be >= 0");
  const std::size_t k = g.tasks();
  const std::size_t m = g.dim();
  const std::span<const double> g0 = g.g0();
  const double radius = c * norm(g0);

  std::vector<double> best_d(g0.begin(), g0.end());
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) best_v = std::min(best_v, dot(g.row(i), g0));
  if (radius == 0.0) return PrimalOracleResult{std::move(best_d), best_v};

  std::vector<double> d(m);
  auto consider = [&](const std::vector<double>& cand) {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) v = std::min(v, dot(g.row(i), cand));
    if (v > best_v) {
      best_v = v;
      best_d = cand;
    }
  };

  if (m <= 3) {
    const long n = budget;
    std::vector<double> offs(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      offs[static_cast<std::size_t>(i)] =
          n == 1 ? 0.0 : -radius + 2.0 * radius * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    const double r2 = radius * radius;
    if (m == 1) {
      for (double ox : offs) {
        d[0] = g0[0] + ox;
        consider(d);
      }
    } else if (m == 2) {
      for (double oy : offs) {
        const double rem = r2 - oy * oy;
        if (rem < 0.0) continue;
        d[1] = g0[1] + oy;
        for (double ox : offs) {
          if (ox * ox > rem) continue;
          d[0] = g0[0] + ox;
          consider(d);
        }
      }
    } else {
      for (double oz : offs) {
        for (double oy : offs) {
          const double rem = r2 - oz * oz - oy * oy;
          if (rem < 0.0) continue;
          d[2] = g0[2] + oz;
          d[1] = g0[1] + oy;
          for (double ox : offs) {
            if (ox * ox > rem) continue;
            d[0] = g0[0] + ox;
            consider(d);
          }
        }
      }
    }
  } else {
    RngStream rng(0x0AC1Eull);  // fixed stream: the oracle is a pure function
    for (long produced = 0; produced < budget; ++produced) {
      // uniform in the ball: gaussian direction, radius ~ u^(1/m)
      double n2 = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        d[j] = rng.next_normal();
        n2 += d[j] * d[j];
      }
      const double len = std::sqrt(n2);
      const double rho =
          radius * std::pow(rng.next_unit(), 1.0 / static_cast<double>(m));
      const double scale = len > 0.0 ? rho / len : 0.0;
      for (std::size_t j = 0; j < m; ++j) d[j] = g0[j] + scale * d[j];
      consider(d);
    }
  }
  return PrimalOracleResult{std::move(best_d), best_v};
}

}  // namespace cagrad

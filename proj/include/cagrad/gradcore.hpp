#pragma once

// Core numeric types shared by all gradient combiners and solvers: parameter
// vectors, per-task gradient bundles, simplex weights and combiner results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cagrad {

// An argument violated a documented precondition.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A matrix expected to be positive semidefinite was not, beyond tolerance.
struct NumericalDegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Matrix = std::vector<std::vector<double>>;

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Parameter coordinates theta in R^m, m >= 1, finite entries.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) throw InvalidInputError("ParamVector: empty");
    if (!all_finite(values)) throw InvalidInputError("ParamVector: non-finite entry");
  }
  ParamVector(std::initializer_list<double> v) : ParamVector(std::vector<double>(v)) {}

  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::span<const double> span() const { return values; }
};

// K per-task gradient rows over m parameters plus the cached average g0.
// Immutable after construction; g0 is accumulated once by sequential
// summation and never recomputed per solver call.
class TaskGradients {
 public:
  TaskGradients(std::size_t tasks, std::size_t dim, std::vector<double> flat_rows)
      : k_(tasks), m_(dim), rows_(std::move(flat_rows)) {
    if (k_ < 1) throw InvalidInputError("TaskGradients: need K >= 1");
    if (m_ < 1) throw InvalidInputError("TaskGradients: need m >= 1");
    if (rows_.size() != k_ * m_) throw InvalidInputError("TaskGradients: row size mismatch");
    if (!all_finite(rows_)) throw InvalidInputError("TaskGradients: non-finite entry");
    g0_.assign(m_, 0.0);
    for (std::size_t i = 0; i < k_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) g0_[j] += rows_[i * m_ + j];
    }
    const double inv_k = 1.0 / static_cast<double>(k_);
    for (double& x : g0_) x *= inv_k;
  }

  explicit TaskGradients(const Matrix& rows)
      : TaskGradients(rows.size(), rows.empty() ? 0 : rows.front().size(), flatten(rows)) {}

  std::size_t tasks() const { return k_; }
  std::size_t dim() const { return m_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(rows_.data() + i * m_, m_);
  }
  std::span<const double> g0() const { return g0_; }

 private:
  static std::vector<double> flatten(const Matrix& rows) {
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (!rows.empty() && r.size() != rows.front().size()) {
        throw InvalidInputError("TaskGradients: ragged rows");
      }
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return flat;
  }

  std::size_t k_ = 0;
  std::size_t m_ = 0;
  std::vector<double> rows_;
  std::vector<double> g0_;
};

// A point on the probability simplex: w_i >= 0, sum w_i = 1 (within 1e-12).
struct SimplexWeights {
  std::vector<double> w;

  explicit SimplexWeights(std::vector<double> v) : w(std::move(v)) {
    if (w.empty()) throw InvalidInputError("SimplexWeights: empty");
    double sum = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw InvalidInputError("SimplexWeights: negative or NaN entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw InvalidInputError("SimplexWeights: entries sum to " + std::to_string(sum));
    }
  }
  SimplexWeights(std::initializer_list<double> v) : SimplexWeights(std::vector<double>(v)) {}

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }
  std::span<const double> span() const { return w; }
};

// Sentinel for lambda* when the rescaled term is absent (phi = 0) or its
// direction degenerates (g_w ~ 0); the update falls back to d = g0.
inline constexpr double kLambdaUnbounded = std::numeric_limits<double>::infinity();

// Update vector d with solver diagnostics.
struct CombineResult {
  std::vector<double> d;
  std::optional<SimplexWeights> weights;  // w*, when a weight problem was solved
  double lambda_star = kLambdaUnbounded;
  double phi = 0.0;              // c^2 ||g0||^2
  double dual_value = 0.0;       // F(w*) when solved, else min_i <g_i, d>
  double min_dot = 0.0;          // min_i <g_i, d>
  double constraint_norm = 0.0;  // ||d - g0||
};

// (1/K) sum_i g_i. Identical to the cached average.
inline std::vector<double> average_gradient(const TaskGradients& g) {
  return std::vector<double>(g.g0().begin(), g.g0().end());
}

// First-order conflict measure: -min_i <g_i, d>. Negative means every task
// loss decreases along the update theta - alpha*d for small alpha.
inline double conflict_measure(const TaskGradients& g, std::span<const double> d) {
  if (d.size() != g.dim()) throw InvalidInputError("conflict_measure: dimension mismatch");
  if (!all_finite(d)) throw InvalidInputError("conflict_measure: non-finite direction");
  double min_dot = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.tasks(); ++i) {
    min_dot = std::min(min_dot, dot(g.row(i), d));
  }
  return -min_dot;
}

struct GramBias {
  Matrix gram;            // M = G G^T
  std::vector<double> bias;  // b_i = <g_i, g0>
};

// Reduces solver work to K-dimensional quantities: one O(K^2 m) pass, after
// which every dual evaluation is independent of m.
inline GramBias gram_and_bias(const TaskGradients& g) {
  const std::size_t k = g.tasks();
  GramBias out;
  out.gram.assign(k, std::vector<double>(k, 0.0));
  out.bias.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = dot(g.row(i), g.row(j));
      out.gram[i][j] = v;
      out.gram[j][i] = v;
    }
    out.bias[i] = dot(g.row(i), g.g0());
  }
  return out;
}

}  // namespace cagrad

#pragma once

// Problem abstraction (per-task losses and exact gradients at theta) plus the
// built-ins: the two-task analytic toy landscape, a quadratic testbed with
// known Lipschitz constant and average-loss optimum, and a small shared-trunk
// network regression with manual backpropagation.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cagrad/exprdsl.hpp"
#include "cagrad/gradcore.hpp"
#include "cagrad/rng.hpp"

namespace cagrad {

class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t tasks() const = 0;
  virtual std::vector<double> losses(const ParamVector& theta) const = 0;
  virtual TaskGradients gradients(const ParamVector& theta) const = 0;
  // Metadata used by theorem-mode steppers, when known.
  virtual std::optional<double> lipschitz() const { return std::nullopt; }
  virtual std::optional<double> average_loss_optimum() const { return std::nullopt; }
};

// Losses defined by DSL expressions; gradients come from forward mode.
class ExpressionProblem final : public Problem {
 public:
  ExpressionProblem(std::vector<std::string> exprs, std::size_t dim,
                    std::string name = "expressions")
      : dim_(dim), name_(std::move(name)), sources_(std::move(exprs)) {
    if (sources_.empty()) throw InvalidInputError("ExpressionProblem: no expressions");
    if (dim_ < 1) throw InvalidInputError("ExpressionProblem: dim must be >= 1");
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      try {
        asts_.push_back(parse(sources_[i]));
      } catch (const ParseError& e) {
        throw InvalidInputError("task " + std::to_string(i + 1) + ": " + e.what());
      }
      if (asts_.back().max_var > static_cast<int>(dim_)) {
        throw InvalidInputError("task " + std::to_string(i + 1) + ": references x" +
                                std::to_string(asts_.back().max_var) +
                                " beyond dimension " + std::to_string(dim_));
      }
    }
  }

  std::string name() const override { return name_; }
  std::size_t dim() const override { return dim_; }
  std::size_t tasks() const override { return asts_.size(); }

  std::vector<double> losses(const ParamVector& theta) const override {
    check_dim(theta);
    std::vector<double> out(asts_.size());
    for (std::size_t i = 0; i < asts_.size(); ++i) {
      out[i] = eval_task(i, theta);
    }
    return out;
  }

  TaskGradients gradients(const ParamVector& theta) const override {
    check_dim(theta);
    std::vector<double> flat;
    flat.reserve(asts_.size() * dim_);
    for (std::size_t i = 0; i < asts_.size(); ++i) {
      DualValue dv = eval_dual_task(i, theta);
      flat.insert(flat.end(), dv.tangents.begin(), dv.tangents.end());
    }
    return TaskGradients(asts_.size(), dim_, std::move(flat));
  }

  const ExprAst& ast(std::size_t task) const { return asts_[task]; }

 private:
  void check_dim(const ParamVector& theta) const {
    if (theta.dim() != dim_) throw InvalidInputError(name_ + ": theta dimension mismatch");
  }
  double eval_task(std::size_t i, const ParamVector& theta) const {
    try {
      return eval(asts_[i], theta);
    } catch (const EvalDomainError& e) {
      throw EvalDomainError(e.node, e.offset,
                            "task " + std::to_string(i + 1) + ": " + e.reason);
    }
  }
  DualValue eval_dual_task(std::size_t i, const ParamVector& theta) const {
    try {
      return eval_dual(asts_[i], theta);
    } catch (const EvalDomainError& e) {
      throw EvalDomainError(e.node, e.offset,
                            "task " + std::to_string(i + 1) + ": " + e.reason);
    }
  }

  std::size_t dim_;
  std::string name_;
  std::vector<std::string> sources_;
  std::vector<ExprAst> asts_;
};

inline std::unique_ptr<Problem> from_expressions(std::vector<std::string> exprs,
                                                 std::size_t dim) {
  return std::make_unique<ExpressionProblem>(std::move(exprs), dim);
}

// The fixed two-task landscape over theta in R^2. Both gate terms vanish
// along theta_2 = 0, so L1 = L2 = 0 on that line.
inline const std::vector<std::string>& toy_loss_expressions() {
  static const std::vector<std::string> kExprs = {
      "max(tanh(0.5*x2), 0) * (log(max(abs(0.5*(-x1-7) - tanh(-x2)), 0.000005)) + 6)"
      " + max(tanh(-0.5*x2), 0) * (((-x1+7)^2 + 0.1*(-x2-8)^2)/10 - 20)",
      "max(tanh(0.5*x2), 0) * (log(max(abs(0.5*(-x1+3) - tanh(-x2) + 2), 0.000005)) + 6)"
      " + max(tanh(-0.5*x2), 0) * (((-x1-7)^2 + 0.1*(-x2-8)^2)/10 - 20)",
  };
  return kExprs;
}

inline std::unique_ptr<Problem> toy_two_task() {
  return std::make_unique<ExpressionProblem>(toy_loss_expressions(), 2, "toy");
}

// L_i(theta) = 1/2 ||theta - a_i||^2. Gradients theta - a_i are exactly
// 1-Lipschitz, and the average loss attains its minimum at the anchor mean.
class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(Matrix anchors) : anchors_(std::move(anchors)) {
    if (anchors_.empty()) throw InvalidInputError("QuadraticProblem: need K >= 1 anchors");
    dim_ = anchors_.front().size();
    if (dim_ < 1) throw InvalidInputError("QuadraticProblem: anchor dimension must be >= 1");
    for (const auto& a : anchors_) {
      if (a.size() != dim_) throw InvalidInputError("QuadraticProblem: ragged anchors");
      if (!all_finite(a)) throw InvalidInputError("QuadraticProblem: non-finite anchor");
    }
  }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return dim_; }
  std::size_t tasks() const override { return anchors_.size(); }

  std::vector<double> losses(const ParamVector& theta) const override {
    check_dim(theta);
    std::vector<double> out(anchors_.size());
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double d = theta[j] - anchors_[i][j];
        s += d * d;
      }
      out[i] = 0.5 * s;
    }
    return out;
  }

  TaskGradients gradients(const ParamVector& theta) const override {
    check_dim(theta);
    std::vector<double> flat(anchors_.size() * dim_);
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        flat[i * dim_ + j] = theta[j] - anchors_[i][j];
      }
    }
    return TaskGradients(anchors_.size(), dim_, std::move(flat));
  }

  std::optional<double> lipschitz() const override { return 1.0; }

  // L0* = 1/2 avg_i ||a_i||^2 - 1/2 ||a_bar||^2, attained at theta* = a_bar.
  std::optional<double> average_loss_optimum() const override {
    const std::size_t k = anchors_.size();
    double avg_sq = 0.0;
    std::vector<double> mean(dim_, 0.0);
    for (const auto& a : anchors_) {
      avg_sq += dot(a, a);
      for (std::size_t j = 0; j < dim_; ++j) mean[j] += a[j];
    }
    avg_sq /= static_cast<double>(k);
    for (double& x : mean) x /= static_cast<double>(k);
    return 0.5 * avg_sq - 0.5 * dot(mean, mean);
  }

  std::vector<double> anchor_mean() const {
    std::vector<double> mean(dim_, 0.0);
    for (const auto& a : anchors_) {
      for (std::size_t j = 0; j < dim_; ++j) mean[j] += a[j];
    }
    for (double& x : mean) x /= static_cast<double>(anchors_.size());
    return mean;
  }

 private:
  void check_dim(const ParamVector& theta) const {
    if (theta.dim() != dim_) throw InvalidInputError("quadratic: theta dimension mismatch");
  }
  Matrix anchors_;
  std::size_t dim_ = 0;
};

inline std::unique_ptr<Problem> quadratic(Matrix anchors) {
  return std::make_unique<QuadraticProblem>(std::move(anchors));
}

// Shared-trunk regression: z = tanh(W x + u) with K fixed affine heads
// y_i = a_i . z + b_i and losses L_i = 1/(2n) sum_t (y_i - target_i)^2.
// The optimizable parameters (and so the TaskGradients the combiners see)
// are the trunk entries only, laid out as [vec(W) row-major, u]; the heads
// stay fixed per-task state so every gradient row lives in the shared space.
class MlpProblem final : public Problem {
 public:
  MlpProblem(std::size_t input_dim, std::size_t width, Matrix inputs, Matrix targets,
             Matrix head_weights, std::vector<double> head_bias)
      : p_(input_dim),
        h_(width),
        x_(std::move(inputs)),
        y_(std::move(targets)),
        head_w_(std::move(head_weights)),
        head_b_(std::move(head_bias)) {
    if (p_ < 1 || h_ < 1) throw InvalidInputError("MlpProblem: bad shape");
    if (x_.empty()) throw InvalidInputError("MlpProblem: need at least one data point");
    if (y_.empty() || y_.size() != head_w_.size() || y_.size() != head_b_.size()) {
      throw InvalidInputError("MlpProblem: target/head count mismatch");
    }
    for (const auto& row : x_) {
      if (row.size() != p_) throw InvalidInputError("MlpProblem: input width mismatch");
    }
    for (const auto& t : y_) {
      if (t.size() != x_.size()) throw InvalidInputError("MlpProblem: target length mismatch");
    }
    for (const auto& a : head_w_) {
      if (a.size() != h_) throw InvalidInputError("MlpProblem: head width mismatch");
    }
  }

  std::string name() const override { return "mlp-synth"; }
  std::size_t dim() const override { return h_ * p_ + h_; }
  std::size_t tasks() const override { return y_.size(); }

  std::vector<double> losses(const ParamVector& theta) const override {
    check_dim(theta);
    const std::size_t k = tasks();
    const std::size_t n = x_.size();
    std::vector<double> out(k, 0.0);
    std::vector<double> z(h_);
    for (std::size_t t = 0; t < n; ++t) {
      forward(theta, x_[t], z);
      for (std::size_t i = 0; i < k; ++i) {
        const double r = dot(head_w_[i], z) + head_b_[i] - y_[i][t];
        out[i] += 0.5 * r * r;
      }
    }
    for (double& v : out) v /= static_cast<double>(n);
    return out;
  }

  TaskGradients gradients(const ParamVector& theta) const override {
    check_dim(theta);
    const std::size_t k = tasks();
    const std::size_t n = x_.size();
    std::vector<double> flat(k * dim(), 0.0);
    std::vector<double> z(h_);
    for (std::size_t t = 0; t < n; ++t) {
      forward(theta, x_[t], z);
      for (std::size_t i = 0; i < k; ++i) {
        const double r = dot(head_w_[i], z) + head_b_[i] - y_[i][t];
        double* row = flat.data() + i * dim();
        for (std::size_t a = 0; a < h_; ++a) {
          const double delta = r * head_w_[i][a] * (1.0 - z[a] * z[a]);
          for (std::size_t b = 0; b < p_; ++b) row[a * p_ + b] += delta * x_[t][b];
          row[h_ * p_ + a] += delta;
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : flat) v *= inv_n;
    return TaskGradients(k, dim(), std::move(flat));
  }

 private:
  void check_dim(const ParamVector& theta) const {
    if (theta.dim() != dim()) throw InvalidInputError("mlp-synth: theta dimension mismatch");
  }
  void forward(const ParamVector& theta, const std::vector<double>& x,
               std::vector<double>& z) const {
    for (std::size_t a = 0; a < h_; ++a) {
      double s = theta[h_ * p_ + a];
      for (std::size_t b = 0; b < p_; ++b) s += theta[a * p_ + b] * x[b];
      z[a] = std::tanh(s);
    }
  }

  std::size_t p_;
  std::size_t h_;
  Matrix x_;        // n x p inputs
  Matrix y_;        // K x n targets
  Matrix head_w_;   // K x h fixed head weights
  std::vector<double> head_b_;
};

inline constexpr std::size_t kMlpInputDim = 3;

// Deterministic synthetic two-task regression: targets are the sine and
// cosine of a fixed random projection of the inputs.
inline std::unique_ptr<MlpProblem> mlp_synth(std::uint64_t seed, std::size_t width,
                                             std::size_t n) {
  if (width < 1 || n < 1) throw InvalidInputError("mlp_synth: width and n must be >= 1");
  RngStream data_rng = derive_stream(seed, 0x11);
  Matrix inputs(n, std::vector<double>(kMlpInputDim));
  for (auto& row : inputs) {
    for (double& v : row) v = data_rng.next_uniform(-1.0, 1.0);
  }
  std::vector<double> proj(kMlpInputDim);
  for (double& v : proj) v = data_rng.next_uniform(-1.0, 1.0);
  Matrix targets(2, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const double u = dot(inputs[t], proj);
    targets[0][t] = std::sin(u);
    targets[1][t] = std::cos(u);
  }
  RngStream head_rng = derive_stream(seed, 0x22);
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(width));
  Matrix head_w(2, std::vector<double>(width));
  std::vector<double> head_b(2);
  for (auto& a : head_w) {
    for (double& v : a) v = head_rng.next_uniform(-head_scale, head_scale);
  }
  for (double& v : head_b) v = head_rng.next_uniform(-0.1, 0.1);
  return std::make_unique<MlpProblem>(kMlpInputDim, width, std::move(inputs),
                                      std::move(targets), std::move(head_w),
                                      std::move(head_b));
}

// Matching deterministic trunk initialization for mlp_synth problems.
inline ParamVector mlp_synth_init(std::uint64_t seed, std::size_t width) {
  RngStream rng = derive_stream(seed, 0x33);
  std::vector<double> theta(width * kMlpInputDim + width);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kMlpInputDim));
  for (double& v : theta) v = rng.next_uniform(-scale, scale);
  return ParamVector(std::move(theta));
}

}  // namespace cagrad

#pragma once

// Parameter-update steppers consuming a combined update vector: fixed-step
// descent, a bias-corrected adaptive-moment stepper, and the decaying step
// size used for the c >= 1 regime.

#include <cmath>
#include <vector>

#include "cagrad/gradcore.hpp"

namespace cagrad {

// theta' = theta - alpha * d, exactly.
inline ParamVector sgd_step(const ParamVector& theta, std::span<const double> d,
                            double alpha) {
  if (!(alpha > 0.0)) throw InvalidInputError("sgd_step: alpha must be > 0");
  if (d.size() != theta.dim()) throw InvalidInputError("sgd_step: dimension mismatch");
  ParamVector out = theta;
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = theta[i] - alpha * d[i];
  return out;
}

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t dim)
      : first_moment(dim, 0.0), second_moment(dim, 0.0) {}
  AdamState(std::size_t dim, double beta1, double beta2, double epsilon)
      : first_moment(dim, 0.0), second_moment(dim, 0.0),
        beta1(beta1), beta2(beta2), epsilon(epsilon) {}
};

// Standard bias-corrected adaptive-moment update applied to d in place of a
// raw gradient. Advances the state by exactly one step.
inline ParamVector adam_step(AdamState& state, const ParamVector& theta,
                             std::span<const double> d, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInputError("adam_step: alpha must be > 0");
  if (d.size() != theta.dim() || state.first_moment.size() != theta.dim()) {
    throw InvalidInputError("adam_step: dimension mismatch");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  ParamVector out = theta;
  for (std::size_t i = 0; i < d.size(); ++i) {
    state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * d[i];
    state.second_moment[i] =
        state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * d[i] * d[i];
    const double m_hat = state.first_moment[i] / bc1;
    const double v_hat = state.second_moment[i] / bc2;
    out[i] = theta[i] - alpha * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  return out;
}

// Equality choice of the decaying step size for c > 1:
// alpha_t = ||g_w*|| / (H (c - 1) ||g0||). Returns 0 when ||g_w*|| = 0,
// at which point the run is Pareto-stationary and halts.
inline double decaying_step_size(double c, double lipschitz, double g0_norm,
                                 double gw_norm) {
  if (!(c > 1.0)) throw InvalidInputError("decaying_step_size: requires c > 1");
  if (!(lipschitz > 0.0)) throw InvalidInputError("decaying_step_size: requires H > 0");
  if (!(g0_norm > 0.0)) throw InvalidInputError("decaying_step_size: requires ||g0|| > 0");
  if (!(gw_norm >= 0.0)) throw InvalidInputError("decaying_step_size: negative ||g_w||");
  return gw_norm / (lipschitz * (c - 1.0) * g0_norm);
}

}  // namespace cagrad

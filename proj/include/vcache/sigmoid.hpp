#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include <Eigen/Core>

#include "vcache/types.hpp"

namespace vcache {

/// Probability that a cache hit at similarity `s` is correct under the
/// sigmoid model with boundary `t` and steepness `gamma`:
/// 1 / (1 + exp(-gamma * (s - t))).
double likelihood(double s, double t, double gamma);

/// Lower clamp applied to the fitted steepness. Observation sets whose
/// unconstrained slope is nonpositive end up here.
inline constexpr double kGammaMin = 1e-3;

struct SigmoidFit {
  double t_hat = std::numeric_limits<double>::quiet_NaN();
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double se_t = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  bool degenerate = true;
  bool gamma_clamped = false;
  int iterations = 0;
};

/// Penalized negative log-likelihood in the (t, gamma) parametrization:
///
///   sum_i -[c_i log L(s_i,t,gamma) + (1-c_i) log(1 - L(s_i,t,gamma))] + reg * gamma^2
///
/// Only the slope is penalized, which keeps the fit equivariant under a
/// shift of all similarities.
class LogisticLoss {
 public:
  LogisticLoss(std::span<const Observation> observations, double reg)
      : observations_(observations), reg_(reg) {}

  double value(double t, double gamma) const;
  /// (d/dt, d/dgamma)
  Eigen::Vector2d gradient(double t, double gamma) const;

 private:
  std::span<const Observation> observations_;
  double reg_;
};

/// Maximum-likelihood fit of (t, gamma). Newton iterations on the
/// equivalent logistic regression logit = b0 + b1 * s with step halving;
/// gamma is constrained to [kGammaMin, gamma_max]. se_t comes from the
/// inverse observed information via the delta method.
///
/// Observation sets with a single class produce `degenerate = true`.
/// Throws Error on an empty observation list.
SigmoidFit fit_logistic(std::span<const Observation> observations, double reg,
                        double gamma_max);

/// Standard normal quantile.
double normal_quantile(double p);

/// Upper (1 - epsilon) confidence bound on the decision boundary:
/// t_hat + z_{1-epsilon} * se_t. Throws on a degenerate fit.
double conservative_t(const SigmoidFit& fit, double epsilon);

}  // namespace vcache

#include "vcache/sigmoid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

namespace vcache {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kStepTolerance = 1e-8;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Logistic regression on centered similarities: logit = a + b * (s - mean).
class CenteredProblem {
 public:
  CenteredProblem(std::span<const Observation> obs, double reg) : reg_(reg) {
    double sum = 0.0;
    for (const auto& o : obs) sum += o.similarity;
    mean_ = sum / static_cast<double>(obs.size());
    x_.reserve(obs.size());
    c_.reserve(obs.size());
    for (const auto& o : obs) {
      x_.push_back(o.similarity - mean_);
      c_.push_back(o.correct ? 1.0 : 0.0);
    }
  }

  double mean() const { return mean_; }

  double loss(const Eigen::Vector2d& p) const {
    double total = reg_ * p[1] * p[1];
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double z = p[0] + p[1] * x_[i];
      total += softplus(z) - c_[i] * z;
    }
    return total;
  }

  void derivatives(const Eigen::Vector2d& p, Eigen::Vector2d& grad, Eigen::Matrix2d& hess) const {
    grad << 0.0, 2.0 * reg_ * p[1];
    hess << 0.0, 0.0, 0.0, 2.0 * reg_;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double pi = logistic(p[0] + p[1] * x_[i]);
      const double r = pi - c_[i];
      const double w = pi * (1.0 - pi);
      grad[0] += r;
      grad[1] += r * x_[i];
      hess(0, 0) += w;
      hess(0, 1) += w * x_[i];
      hess(1, 1) += w * x_[i] * x_[i];
    }
    hess(1, 0) = hess(0, 1);
  }

 private:
  double reg_;
  double mean_ = 0.0;
  std::vector<double> x_;
  std::vector<double> c_;
};

struct Solve {
  Eigen::Vector2d params;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton. With `fixed_slope`, only the intercept moves.
Solve newton(const CenteredProblem& problem, Eigen::Vector2d start, bool fixed_slope) {
  Solve out{start, 0, false};
  double current = problem.loss(out.params);
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
  for (int it = 1; it <= kMaxIterations; ++it) {
    out.iterations = it;
    problem.derivatives(out.params, grad, hess);
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    if (fixed_slope) {
      if (hess(0, 0) <= 0.0) return out;
      step[0] = -grad[0] / hess(0, 0);
    } else {
      Eigen::LDLT<Eigen::Matrix2d> ldlt(hess);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
      step = -ldlt.solve(grad);
    }
    if (!step.allFinite()) return out;

    double scale = 1.0;
    Eigen::Vector2d next = out.params + step;
    double next_loss = problem.loss(next);
    while (!(next_loss <= current) && scale > 1e-12) {
      scale *= 0.5;
      next = out.params + scale * step;
      next_loss = problem.loss(next);
    }
    const double moved = (scale * step).cwiseAbs().maxCoeff();
    if (next_loss <= current) {
      out.params = next;
      current = next_loss;
    }
    if (moved < kStepTolerance) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

double slope_derivative(const CenteredProblem& problem, const Eigen::Vector2d& p) {
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
  problem.derivatives(p, grad, hess);
  return grad[1];
}

}  // namespace

double likelihood(double s, double t, double gamma) {
  if (!(gamma > 0.0)) {
    throw Error("likelihood: gamma must be positive");
  }
  if (!std::isfinite(s) || !std::isfinite(t) || !std::isfinite(gamma)) {
    throw Error("likelihood: non-finite input");
  }
  return logistic(gamma * (s - t));
}

double LogisticLoss::value(double t, double gamma) const {
  double total = reg_ * gamma * gamma;
  for (const auto& o : observations_) {
    const double z = gamma * (o.similarity - t);
    total += softplus(z) - (o.correct ? z : 0.0);
  }
  return total;
}

Eigen::Vector2d LogisticLoss::gradient(double t, double gamma) const {
  Eigen::Vector2d g(0.0, 2.0 * reg_ * gamma);
  for (const auto& o : observations_) {
    const double r = logistic(gamma * (o.similarity - t)) - (o.correct ? 1.0 : 0.0);
    g[0] += -gamma * r;
    g[1] += (o.similarity - t) * r;
  }
  return g;
}

SigmoidFit fit_logistic(std::span<const Observation> observations, double reg,
                        double gamma_max) {
  if (observations.empty()) {
    throw Error("fit_logistic: empty observation list");
  }
  SigmoidFit fit;
  for (const auto& o : observations) (o.correct ? fit.n_pos : fit.n_neg)++;
  if (fit.n_pos == 0 || fit.n_neg == 0) return fit;

  const double gamma_min = std::min(kGammaMin, gamma_max);
  const CenteredProblem problem(observations, reg);
  const double base_rate = static_cast<double>(fit.n_pos) / static_cast<double>(observations.size());
  const double start_intercept = std::log(base_rate / (1.0 - base_rate));

  // The profile loss over the slope is convex, so the sign of its derivative
  // at each bound tells whether the optimum sits on that bound.
  Solve solve = newton(problem, {start_intercept, gamma_max}, true);
  if (solve.converged && slope_derivative(problem, solve.params) <= 0.0) {
    fit.gamma_clamped = true;
  } else {
    Solve low = newton(problem, {start_intercept, gamma_min}, true);
    if (low.converged && slope_derivative(problem, low.params) >= 0.0) {
      solve = low;
      fit.gamma_clamped = true;
    } else {
      solve = newton(problem, {start_intercept, 1.0}, false);
      if (solve.converged && (solve.params[1] > gamma_max || solve.params[1] < gamma_min)) {
        solve.converged = false;
      }
    }
  }
  fit.iterations = solve.iterations;
  if (!solve.converged) return fit;

  const double a = solve.params[0];
  const double b = solve.params[1];
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
  problem.derivatives(solve.params, grad, hess);
  const Eigen::Matrix2d cov = hess.inverse();
  const Eigen::Vector2d dt(-1.0 / b, a / (b * b));
  const double var_t = dt.dot(cov * dt);

  fit.t_hat = problem.mean() - a / b;
  fit.gamma_hat = b;
  fit.se_t = std::sqrt(var_t);
  fit.degenerate = !(std::isfinite(fit.t_hat) && std::isfinite(fit.se_t) && fit.se_t > 0.0);
  return fit;
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

double conservative_t(const SigmoidFit& fit, double epsilon) {
  if (fit.degenerate) {
    throw Error("conservative_t: degenerate fit");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error("conservative_t: epsilon must be in (0,1)");
  }
  return fit.t_hat + normal_quantile(1.0 - epsilon) * fit.se_t;
}

}  // namespace vcache

#include "vcache/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vcache {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool cold(const SigmoidFit& fit, std::size_t count, std::size_t min_observations) {
  return count < min_observations || fit.degenerate;
}

SigmoidFit fit_if_warm(std::span<const Observation> observations, const CacheConfig& config) {
  if (observations.empty() || observations.size() < config.min_observations) return {};
  return fit_logistic(observations, config.l2_regularization, config.gamma_max);
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0,1)");
}

}  // namespace

std::string policy_name(const PolicyKind& policy) {
  return std::visit(overloaded{
                        [](const policies::GlobalStatic&) { return "gs"; },
                        [](const policies::GlobalDynamic&) { return "gd"; },
                        [](const policies::LocalHardThreshold&) { return "ld1"; },
                        [](const policies::LocalSigmoid&) { return "ld2"; },
                        [](const policies::VCacheVerified&) { return "vcache"; },
                    },
                    policy);
}

double policy_parameter(const PolicyKind& policy) {
  return std::visit(
      overloaded{
          [](const policies::GlobalStatic& p) { return p.threshold; },
          [](const policies::GlobalDynamic& p) { return p.delta; },
          [](const policies::LocalHardThreshold&) { return std::numeric_limits<double>::quiet_NaN(); },
          [](const policies::LocalSigmoid& p) { return p.delta; },
          [](const policies::VCacheVerified& p) { return p.delta; },
      },
      policy);
}

PolicyKind make_policy(const std::string& name, double parameter) {
  PolicyKind policy;
  if (name == "gs") {
    policy = policies::GlobalStatic{parameter};
  } else if (name == "gd") {
    policy = policies::GlobalDynamic{parameter};
  } else if (name == "ld1") {
    policy = policies::LocalHardThreshold{};
  } else if (name == "ld2") {
    policy = policies::LocalSigmoid{parameter};
  } else if (name == "vcache") {
    policy = policies::VCacheVerified{parameter};
  } else {
    throw ConfigError("unknown policy '" + name + "' (expected gs, gd, ld1, ld2 or vcache)");
  }
  validate_policy(policy);
  return policy;
}

void validate_policy(const PolicyKind& policy) {
  std::visit(overloaded{
                 [](const policies::GlobalStatic& p) {
                   // Thresholds above 1 are allowed: they disable exploitation.
                   if (!std::isfinite(p.threshold)) throw ConfigError("threshold must be finite");
                 },
                 [](const policies::GlobalDynamic& p) { check_delta(p.delta); },
                 [](const policies::LocalHardThreshold&) {},
                 [](const policies::LocalSigmoid& p) { check_delta(p.delta); },
                 [](const policies::VCacheVerified& p) { check_delta(p.delta); },
             },
             policy);
}

bool policy_is_randomized(const PolicyKind& policy) {
  return std::holds_alternative<policies::GlobalDynamic>(policy) ||
         std::holds_alternative<policies::VCacheVerified>(policy);
}

EpsilonGrid::EpsilonGrid(std::span<const double> epsilons)
    : epsilons_(epsilons.begin(), epsilons.end()) {
  if (epsilons_.empty()) throw ConfigError("epsilon_grid must not be empty");
  z_.reserve(epsilons_.size());
  for (double e : epsilons_) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilon_grid values must be in (0,1)");
    z_.push_back(normal_quantile(1.0 - e));
  }
}

TauResult fallback_tau() { return TauResult{1.0, 0.0, 0.0, true}; }

Decision decide_static(double s, double threshold) {
  return s >= threshold ? Decision::Exploit : Decision::Explore;
}

TauResult compute_tau(double s, const SigmoidFit& fit, double delta, const EpsilonGrid& grid) {
  if (fit.degenerate) return fallback_tau();
  TauResult best{std::numeric_limits<double>::infinity(), 0.0, 0.0, false};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double eps = grid.epsilon(i);
    const double t_prime = fit.t_hat + grid.z(i) * fit.se_t;
    const double alpha = (1.0 - eps) * likelihood(s, t_prime, fit.gamma_hat);
    const double tau = ((1.0 - delta) - alpha) / (1.0 - alpha);
    if (tau < best.tau) {
      best.tau = tau;
      best.epsilon_star = eps;
      best.alpha_star = alpha;
    }
  }
  best.tau = std::clamp(best.tau, 0.0, 1.0);
  return best;
}

TauResult compute_tau(double s, const SigmoidFit& fit, double delta,
                      std::span<const double> epsilon_grid) {
  return compute_tau(s, fit, delta, EpsilonGrid(epsilon_grid));
}

Decision decide_randomized(const TauResult& tau, double rng_draw) {
  return rng_draw <= tau.tau ? Decision::Explore : Decision::Exploit;
}

VCacheDecision decide_vcache_with_fit(double s, const SigmoidFit& fit,
                                      std::size_t observation_count, double delta,
                                      std::size_t min_observations, const EpsilonGrid& grid,
                                      double rng_draw) {
  if (cold(fit, observation_count, min_observations)) {
    return {Decision::Explore, fallback_tau()};
  }
  TauResult tau = compute_tau(s, fit, delta, grid);
  return {decide_randomized(tau, rng_draw), tau};
}

VCacheDecision decide_vcache(double s, std::span<const Observation> observations,
                             const CacheConfig& config, double rng_draw) {
  const SigmoidFit fit = fit_if_warm(observations, config);
  return decide_vcache_with_fit(s, fit, observations.size(), config.delta,
                                config.min_observations, EpsilonGrid(config.epsilon_grid),
                                rng_draw);
}

Decision decide_ld1_with_fit(double s, const SigmoidFit& fit, std::size_t observation_count,
                             std::size_t min_observations) {
  if (cold(fit, observation_count, min_observations)) return Decision::Explore;
  return s >= fit.t_hat ? Decision::Exploit : Decision::Explore;
}

Decision decide_ld1(double s, std::span<const Observation> observations,
                    const CacheConfig& config) {
  return decide_ld1_with_fit(s, fit_if_warm(observations, config), observations.size(),
                             config.min_observations);
}

Decision decide_ld2_with_fit(double s, const SigmoidFit& fit, std::size_t observation_count,
                             double delta, std::size_t min_observations) {
  if (cold(fit, observation_count, min_observations)) return Decision::Explore;
  return likelihood(s, fit.t_hat, fit.gamma_hat) >= 1.0 - delta ? Decision::Exploit
                                                                 : Decision::Explore;
}

Decision decide_ld2(double s, std::span<const Observation> observations,
                    const CacheConfig& config) {
  return decide_ld2_with_fit(s, fit_if_warm(observations, config), observations.size(),
                             config.delta, config.min_observations);
}

VCacheDecision decide_global_dynamic(double s, std::span<const Observation> global_observations,
                                     const CacheConfig& config, double rng_draw) {
  return decide_vcache(s, global_observations, config, rng_draw);
}

}  // namespace vcache

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vcache/sigmoid.hpp"
#include "vcache/types.hpp"

namespace vcache {

// Baseline ladder. Per-embedding static thresholds fixed a priori are not
// representable here; they cannot be chosen without seeing the data.
namespace policies {

/// Exploit iff s >= threshold, one threshold for every entry.
struct GlobalStatic {
  double threshold = 0.9;
};
/// The verified policy fed one cache-wide observation pool.
struct GlobalDynamic {
  double delta = 0.02;
};
/// Per-entry logistic threshold t_hat, exploit iff s >= t_hat.
struct LocalHardThreshold {};
/// Per-entry sigmoid, exploit iff L(s, t_hat, gamma_hat) >= 1 - delta.
struct LocalSigmoid {
  double delta = 0.02;
};
/// Per-entry sigmoid with confidence band and randomized exploration.
struct VCacheVerified {
  double delta = 0.02;
};

}  // namespace policies

using PolicyKind = std::variant<policies::GlobalStatic, policies::GlobalDynamic,
                                policies::LocalHardThreshold, policies::LocalSigmoid,
                                policies::VCacheVerified>;

/// Short CLI name: gs, gd, ld1, ld2, vcache.
std::string policy_name(const PolicyKind& policy);
/// Sweep parameter (threshold or delta); NaN for LocalHardThreshold.
double policy_parameter(const PolicyKind& policy);
/// Builds a policy from its short name and parameter. Throws ConfigError.
PolicyKind make_policy(const std::string& name, double parameter);
void validate_policy(const PolicyKind& policy);
/// Whether the policy consumes random draws.
bool policy_is_randomized(const PolicyKind& policy);

/// Epsilon values with their precomputed normal quantiles z_{1-eps}.
class EpsilonGrid {
 public:
  explicit EpsilonGrid(std::span<const double> epsilons);

  std::size_t size() const { return epsilons_.size(); }
  double epsilon(std::size_t i) const { return epsilons_[i]; }
  double z(std::size_t i) const { return z_[i]; }

 private:
  std::vector<double> epsilons_;
  std::vector<double> z_;
};

struct TauResult {
  double tau = 1.0;
  double epsilon_star = 0.0;
  double alpha_star = 0.0;
  bool used_fallback = true;
};

/// Fallback result used on cold start or a degenerate fit: always explore.
TauResult fallback_tau();

Decision decide_static(double s, double threshold);

/// Minimum exploration probability over the epsilon grid:
/// tau(eps) = ((1 - delta) - alpha) / (1 - alpha), alpha = (1 - eps) L(s, t'(eps), gamma_hat).
TauResult compute_tau(double s, const SigmoidFit& fit, double delta, const EpsilonGrid& grid);
TauResult compute_tau(double s, const SigmoidFit& fit, double delta,
                      std::span<const double> epsilon_grid);

/// Explore iff draw <= tau.
Decision decide_randomized(const TauResult& tau, double rng_draw);

struct VCacheDecision {
  Decision decision = Decision::Explore;
  TauResult tau;
};

/// Verified policy on an already-fitted model; `observation_count` drives the
/// cold-start rule.
VCacheDecision decide_vcache_with_fit(double s, const SigmoidFit& fit,
                                      std::size_t observation_count, double delta,
                                      std::size_t min_observations, const EpsilonGrid& grid,
                                      double rng_draw);

VCacheDecision decide_vcache(double s, std::span<const Observation> observations,
                             const CacheConfig& config, double rng_draw);

Decision decide_ld1(double s, std::span<const Observation> observations,
                    const CacheConfig& config);
Decision decide_ld1_with_fit(double s, const SigmoidFit& fit, std::size_t observation_count,
                             std::size_t min_observations);

Decision decide_ld2(double s, std::span<const Observation> observations,
                    const CacheConfig& config);
Decision decide_ld2_with_fit(double s, const SigmoidFit& fit, std::size_t observation_count,
                             double delta, std::size_t min_observations);

VCacheDecision decide_global_dynamic(double s, std::span<const Observation> global_observations,
                                     const CacheConfig& config, double rng_draw);

}  // namespace vcache

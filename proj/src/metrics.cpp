#include "vcache/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcache/sigmoid.hpp"
#include "vcache/types.hpp"

namespace vcache {

Interval binomial_ci(std::uint64_t successes, std::uint64_t n, double level) {
  if (n == 0) throw Error("binomial_ci: n must be at least 1");
  if (successes > n) throw Error("binomial_ci: successes exceed n");
  if (!(level > 0.0 && level < 1.0)) throw Error("binomial_ci: level must be in (0,1)");

  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (successes == 0) ci.low = 0.0;
  if (successes == n) ci.high = 1.0;
  return ci;
}

void MetricsAccumulator::record_explore(double latency_ms) {
  ++n_;
  ++explores_;
  latencies_.push_back(latency_ms);
  push_point();
}

void MetricsAccumulator::record_exploit(bool correct, double latency_ms) {
  ++n_;
  (correct ? tp_ : fp_)++;
  latencies_.push_back(latency_ms);
  push_point();
}

void MetricsAccumulator::push_point() {
  const double n = static_cast<double>(n_);
  curve_.push_back({n_, static_cast<double>(fp_) / n, static_cast<double>(tp_ + fp_) / n});
}

namespace {

double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  std::sort(sorted.begin(), sorted.end());
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.n = n_;
  r.tp = tp_;
  r.fp = fp_;
  r.explores = explores_;
  if (n_ > 0) {
    const double n = static_cast<double>(n_);
    r.error_rate = static_cast<double>(fp_) / n;
    r.hit_rate = static_cast<double>(tp_ + fp_) / n;
    r.error_ci_95 = binomial_ci(fp_, n_, 0.95);
    r.hit_ci_95 = binomial_ci(tp_ + fp_, n_, 0.95);
    r.latency_summary.mean_ms =
        std::accumulate(latencies_.begin(), latencies_.end(), 0.0) / n;
    r.latency_summary.p50_ms = percentile(latencies_, 0.5);
    r.latency_summary.p95_ms = percentile(latencies_, 0.95);
  }
  r.cumulative_curves = curve_;
  return r;
}

}  // namespace vcache

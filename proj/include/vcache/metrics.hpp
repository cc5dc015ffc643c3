#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace vcache {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for `successes` out of `n` at confidence `level`.
/// Throws Error on invalid counts or level.
Interval binomial_ci(std::uint64_t successes, std::uint64_t n, double level = 0.95);

struct CurvePoint {
  std::uint64_t step = 0;  // 1-based request count
  double error_rate = 0.0;
  double hit_rate = 0.0;
};

struct LatencySummary {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

struct MetricsReport {
  std::uint64_t n = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t explores = 0;
  double error_rate = 0.0;
  double hit_rate = 0.0;
  Interval error_ci_95;
  Interval hit_ci_95;
  std::vector<CurvePoint> cumulative_curves;
  LatencySummary latency_summary;
};

/// Streams per-request results into a MetricsReport.
class MetricsAccumulator {
 public:
  void record_explore(double latency_ms);
  void record_exploit(bool correct, double latency_ms);

  std::uint64_t n() const { return n_; }
  MetricsReport report() const;

 private:
  void push_point();

  std::uint64_t n_ = 0;
  std::uint64_t tp_ = 0;
  std::uint64_t fp_ = 0;
  std::uint64_t explores_ = 0;
  std::vector<CurvePoint> curve_;
  std::vector<double> latencies_;
};

}  // namespace vcache

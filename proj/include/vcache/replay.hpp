#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcache/metrics.hpp"
#include "vcache/policy.hpp"
#include "vcache/semantic_cache.hpp"
#include "vcache/trace.hpp"

namespace vcache {

/// Called once per replayed record. `exploit_correct` is the ground-truth
/// adjudication of a hit and is empty for explores.
using ReplayObserver = std::function<void(const TraceRecord&, const RequestOutcome&,
                                          std::optional<bool> exploit_correct)>;

/// Streams `trace` through a fresh cache. Embeddings come from the records
/// (or a seeded mock backend when a record has none); responses come from
/// an oracle returning each record's gold response ("class-<id>" when only a
/// class is given). The cache labels its own observations by exact match of
/// those responses; hits are adjudicated separately, by class_id when both
/// records carry one and by exact match of gold responses otherwise, and
/// that verdict only feeds the returned metrics.
///
/// The replay is synchronous and single-threaded. Throws TraceError on an
/// unlabeled record.
MetricsReport replay(std::span<const TraceRecord> trace, const PolicyKind& policy,
                     const CacheConfig& config, const ReplayObserver& observer = {});

struct SweepRow {
  std::string policy;
  double parameter = 0.0;
  MetricsReport metrics;
};

/// One replay per policy, each on a fresh cache. Throws on an empty list.
std::vector<SweepRow> sweep(std::span<const TraceRecord> trace,
                            std::span<const PolicyKind> policies, const CacheConfig& config);

/// Column order of the sweep CSV. Changing it is a format change.
inline constexpr const char* kSweepCsvHeader =
    "policy,parameter,n,tp,fp,explores,error_rate,hit_rate,error_ci_low,error_ci_high,"
    "mean_latency_ms";

/// Writes the sweep table. Wall-clock latency is not reproducible, so the
/// mean_latency_ms column holds NA unless `include_latency` is set.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, bool include_latency);

/// Cumulative curves, one line per request:
/// policy,parameter,step,error_rate,hit_rate.
void write_curves_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace vcache

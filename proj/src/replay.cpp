#include "vcache/replay.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "vcache/equivalence.hpp"

namespace vcache {

namespace {

constexpr std::size_t kMockDim = 64;

std::string gold_of(const TraceRecord& r) {
  if (r.gold_response) return *r.gold_response;
  return "class-" + std::to_string(*r.class_id);
}

bool same_label(const TraceRecord& served_from, const TraceRecord& current) {
  if (served_from.class_id && current.class_id) {
    return *served_from.class_id == *current.class_id;
  }
  return exact_match(gold_of(served_from), gold_of(current)).equal;
}

std::string format_number(const char* fmt, double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

MetricsReport replay(std::span<const TraceRecord> trace, const PolicyKind& policy,
                     const CacheConfig& config, const ReplayObserver& observer) {
  PrecomputedEmbeddingBackend precomputed;
  MockEmbeddingBackend mock(kMockDim, config.rng_seed.value_or(0));
  OracleChatBackend oracle;
  bool all_precomputed = true;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRecord& r = trace[i];
    if (!r.labeled()) {
      throw TraceError("record " + std::to_string(r.id) + " has neither class_id nor gold_response");
    }
    if (r.embedding) {
      precomputed.add(r.id, *r.embedding);
    } else {
      all_precomputed = false;
    }
    oracle.add(r.id, gold_of(r));
  }
  if (!all_precomputed) {
    for (const TraceRecord& r : trace) {
      if (r.embedding) {
        throw TraceError("trace mixes records with and without embeddings");
      }
    }
  }

  CacheConfig cache_config = config;
  cache_config.label_mode = LabelMode::ExactMatch;
  cache_config.async_labeling = false;
  SemanticCache cache(cache_config, policy);
  EmbeddingBackend& embedder =
      all_precomputed ? static_cast<EmbeddingBackend&>(precomputed) : mock;
  CacheBackends backends{embedder, oracle, nullptr};

  // entry id -> position of the record whose response it stores
  std::unordered_map<EntryId, std::size_t> source;
  MetricsAccumulator metrics;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRecord& r = trace[i];
    const std::string text = r.prompt.empty() ? "record " + std::to_string(r.id) : r.prompt;
    const RequestOutcome out = cache.request(Prompt{text, r.id}, backends);
    std::optional<bool> verdict;
    if (out.action == Decision::Exploit) {
      verdict = same_label(trace[source.at(*out.entry_id_served)], r);
      cache.adjudicate_exploit(*verdict);
      metrics.record_exploit(*verdict, out.timings.total_ms);
    } else {
      metrics.record_explore(out.timings.total_ms);
    }
    if (out.inserted_entry_id) source.emplace(*out.inserted_entry_id, i);
    if (observer) observer(r, out, verdict);
  }
  return metrics.report();
}

std::vector<SweepRow> sweep(std::span<const TraceRecord> trace,
                            std::span<const PolicyKind> policies, const CacheConfig& config) {
  if (policies.empty()) throw ConfigError("sweep: empty parameter list");
  std::vector<SweepRow> rows;
  rows.reserve(policies.size());
  for (const PolicyKind& p : policies) {
    rows.push_back({policy_name(p), policy_parameter(p), replay(trace, p, config)});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, bool include_latency) {
  out << kSweepCsvHeader << '\n';
  for (const SweepRow& row : rows) {
    const MetricsReport& m = row.metrics;
    out << row.policy << ',' << format_number("%.6g", row.parameter) << ',' << m.n << ','
        << m.tp << ',' << m.fp << ',' << m.explores << ','
        << format_number("%.6f", m.error_rate) << ',' << format_number("%.6f", m.hit_rate) << ','
        << format_number("%.6f", m.error_ci_95.low) << ','
        << format_number("%.6f", m.error_ci_95.high) << ','
        << (include_latency ? format_number("%.6f", m.latency_summary.mean_ms) : "NA") << '\n';
  }
}

void write_curves_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "policy,parameter,step,error_rate,hit_rate\n";
  for (const SweepRow& row : rows) {
    const std::string param = format_number("%.6g", row.parameter);
    for (const CurvePoint& p : row.metrics.cumulative_curves) {
      out << row.policy << ',' << param << ',' << p.step << ','
          << format_number("%.6f", p.error_rate) << ',' << format_number("%.6f", p.hit_rate)
          << '\n';
    }
  }
}

}  // namespace vcache

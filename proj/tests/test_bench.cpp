#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "vcache/metrics.hpp"
#include "vcache/replay.hpp"
#include "vcache/synthetic.hpp"
#include "vcache/trace.hpp"

using namespace vcache;

namespace {

CacheConfig seeded(std::uint64_t seed = 1) {
  CacheConfig c;
  c.rng_seed = seed;
  return c;
}

TraceRecord labeled(std::int64_t id, EmbeddingVector v, std::int64_t cls) {
  TraceRecord r;
  r.id = id;
  r.prompt = "p" + std::to_string(id);
  r.embedding = std::move(v);
  r.class_id = cls;
  return r;
}

}  // namespace

TEST(Trace, ParsesLinesInOrder) {
  std::istringstream in(
      "{\"id\": 1, \"prompt\": \"a\", \"embedding\": [1, 0], \"class_id\": 3}\n"
      "\n"
      "{\"id\": 2, \"prompt\": \"b\", \"gold_response\": \"yes\", \"extra\": true}\n"
      "{\"id\": 3, \"prompt\": \"c\"}\n");
  const auto t = parse_trace(in);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].class_id, 3);
  EXPECT_EQ(t[0].embedding->dim(), 2u);
  EXPECT_EQ(t[1].gold_response, "yes");
  EXPECT_FALSE(t[2].labeled());
}

TEST(Trace, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_trace(in);
    } catch (const TraceError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string ok = "{\"id\": 1, \"prompt\": \"a\"}\n";
  EXPECT_NE(message(ok + ok).find("line 2"), std::string::npos);
  EXPECT_NE(message(ok + "{oops\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("{\"prompt\": \"a\"}\n").find("line 1"), std::string::npos);
  EXPECT_THROW(load_trace("/nonexistent/trace.jsonl"), TraceError);
}

TEST(Trace, WriteParseRoundTrip) {
  SyntheticSpec spec;
  spec.num_records = 50;
  spec.num_classes = 5;
  spec.dim = 4;
  const auto records = generate_synthetic(spec);
  std::stringstream buf;
  write_trace(buf, records);
  EXPECT_EQ(parse_trace(buf), records);
}

TEST(Synthetic, DeterministicAndShaped) {
  SyntheticSpec spec;
  spec.num_records = 500;
  spec.num_classes = 20;
  spec.dim = 16;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, static_cast<std::int64_t>(i));
    EXPECT_NEAR(a[i].embedding->values().norm(), 1.0, 1e-12);
    EXPECT_EQ(a[i].gold_response, "class-" + std::to_string(*a[i].class_id));
  }
  spec.rng_seed = 8;
  EXPECT_NE(generate_synthetic(spec), a);
}

TEST(Synthetic, NoiselessClassesCollapse) {
  SyntheticSpec spec;
  spec.num_records = 200;
  spec.num_classes = 5;
  spec.dim = 8;
  spec.intra_class_noise = 0.0;
  const auto t = generate_synthetic(spec);
  for (const auto& x : t) {
    for (const auto& y : t) {
      if (x.class_id == y.class_id) {
        EXPECT_EQ(x.embedding->to_std(), y.embedding->to_std());
      }
    }
  }
}

TEST(Synthetic, WithinClassCloserThanAcross) {
  SyntheticSpec spec;
  spec.num_records = 400;
  spec.num_classes = 10;
  spec.dim = 32;
  const auto t = generate_synthetic(spec);
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double s = t[i].embedding->values().dot(t[j].embedding->values());
      if (t[i].class_id == t[j].class_id) {
        within += s;
        ++nw;
      } else {
        across += s;
        ++na;
      }
    }
  }
  EXPECT_GT(within / nw, across / na + 0.5);
}

TEST(Synthetic, MaxPerClassAndValidation) {
  SyntheticSpec spec;
  spec.num_records = 100;
  spec.num_classes = 10;
  spec.max_per_class = 10;
  std::map<std::int64_t, int> counts;
  for (const auto& r : generate_synthetic(spec)) ++counts[*r.class_id];
  for (const auto& [cls, n] : counts) EXPECT_EQ(n, 10);
  spec.max_per_class = 5;
  EXPECT_THROW(validate_synthetic_spec(spec), Error);
  spec = SyntheticSpec{};
  spec.dim = 0;
  EXPECT_THROW(generate_synthetic(spec), Error);
}

TEST(Replay, IdenticalPromptsUnderPermissiveThreshold) {
  const std::vector<TraceRecord> t = {labeled(1, EmbeddingVector{1, 0}, 4),
                                      labeled(2, EmbeddingVector{1, 0}, 4)};
  const auto m = replay(t, policies::GlobalStatic{0.0}, seeded());
  EXPECT_EQ(m.n, 2u);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_DOUBLE_EQ(m.hit_rate, 0.5);
}

TEST(Replay, ImpossibleThresholdNeverHits) {
  std::vector<TraceRecord> t;
  for (int i = 0; i < 20; ++i) t.push_back(labeled(i, EmbeddingVector{1, 0}, 1));
  const auto m = replay(t, policies::GlobalStatic{1.01}, seeded());
  EXPECT_EQ(m.hit_rate, 0.0);
  EXPECT_EQ(m.explores, 20u);
}

TEST(Replay, RejectsUnlabeledRecord) {
  std::vector<TraceRecord> t = {labeled(1, EmbeddingVector{1, 0}, 4)};
  TraceRecord r;
  r.id = 2;
  r.prompt = "unlabeled";
  t.push_back(r);
  EXPECT_THROW(replay(t, policies::GlobalStatic{0.5}, seeded()), TraceError);
}

TEST(Replay, WrongHitIsAFalsePositive) {
  const std::vector<TraceRecord> t = {labeled(1, EmbeddingVector{1, 0}, 1),
                                      labeled(2, EmbeddingVector{1, 0}, 2)};
  const auto m = replay(t, policies::GlobalStatic{0.0}, seeded());
  EXPECT_EQ(m.fp, 1u);
  EXPECT_DOUBLE_EQ(m.error_rate, 0.5);
}

TEST(Replay, CountsPartitionTheTraceAndCurvesAreCumulative) {
  SyntheticSpec spec;
  spec.num_records = 1500;
  spec.num_classes = 40;
  spec.dim = 16;
  const auto t = generate_synthetic(spec);
  for (const PolicyKind& p :
       std::vector<PolicyKind>{policies::GlobalStatic{0.9}, policies::VCacheVerified{0.05}}) {
    int observed = 0;
    const auto m = replay(t, p, seeded(), [&](const auto&, const auto&, auto) { ++observed; });
    EXPECT_EQ(observed, 1500);
    EXPECT_EQ(m.tp + m.fp + m.explores, m.n);
    EXPECT_DOUBLE_EQ(m.error_rate, static_cast<double>(m.fp) / m.n);
    EXPECT_DOUBLE_EQ(m.hit_rate, static_cast<double>(m.tp + m.fp) / m.n);
    ASSERT_EQ(m.cumulative_curves.size(), m.n);
    EXPECT_EQ(m.cumulative_curves.back().error_rate, m.error_rate);
    EXPECT_EQ(m.cumulative_curves.back().hit_rate, m.hit_rate);
    EXPECT_LE(m.error_ci_95.low, m.error_rate);
    EXPECT_GE(m.error_ci_95.high, m.error_rate);
  }
}

TEST(Replay, DeterministicForFixedSeed) {
  SyntheticSpec spec;
  spec.num_records = 800;
  spec.num_classes = 30;
  spec.dim = 16;
  const auto t = generate_synthetic(spec);
  const auto a = replay(t, policies::VCacheVerified{0.02}, seeded(5));
  const auto b = replay(t, policies::VCacheVerified{0.02}, seeded(5));
  EXPECT_EQ(a.tp, b.tp);
  EXPECT_EQ(a.fp, b.fp);
  EXPECT_EQ(a.explores, b.explores);
}

// Reference values from statsmodels proportion_confint(method="wilson");
// see tests/oracles/wilson_reference.py.
TEST(BinomialCi, MatchesReferenceImplementation) {
  struct Case {
    std::uint64_t k, n;
    double low, high;
  };
  for (const Case c : {Case{0, 100, 0.0, 0.0369934982}, Case{50, 100, 0.4038315304, 0.5961684696},
                       Case{100, 100, 0.9630065018, 1.0}, Case{1, 10, 0.0178762131, 0.4041500268},
                       Case{7, 20000, 0.0001695532, 0.0007223485},
                       Case{3, 1000, 0.0010207839, 0.0087830141}}) {
    const auto ci = binomial_ci(c.k, c.n);
    EXPECT_NEAR(ci.low, c.low, 1e-9) << c.k << "/" << c.n;
    EXPECT_NEAR(ci.high, c.high, 1e-9) << c.k << "/" << c.n;
  }
  EXPECT_THROW(binomial_ci(5, 4), Error);
  EXPECT_THROW(binomial_ci(0, 0), Error);
  EXPECT_THROW(binomial_ci(1, 10, 1.0), Error);
}

TEST(Sweep, CsvLayoutAndReproducibility) {
  SyntheticSpec spec;
  spec.num_records = 300;
  spec.num_classes = 10;
  spec.dim = 8;
  const auto t = generate_synthetic(spec);
  const std::vector<PolicyKind> ps = {policies::GlobalStatic{0.9}, policies::VCacheVerified{0.02}};
  auto csv = [&] {
    std::ostringstream out;
    write_sweep_csv(out, sweep(t, ps, seeded()), false);
    return out.str();
  };
  const std::string first = csv();
  EXPECT_EQ(first, csv());
  std::istringstream lines(first);
  std::string header, row;
  std::getline(lines, header);
  EXPECT_EQ(header, kSweepCsvHeader);
  int rows = 0;
  while (std::getline(lines, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
    EXPECT_EQ(row.substr(row.rfind(',') + 1), "NA");
  }
  EXPECT_EQ(rows, 2);
  EXPECT_THROW(sweep(t, std::span<const PolicyKind>{}, seeded()), Error);
}

TEST(Sweep, ZeroThresholdOnPositiveOrthantHitsAllButFirst) {
  std::vector<TraceRecord> t;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 50; ++i) t.push_back(labeled(i, EmbeddingVector{u(rng), u(rng), u(rng)}, i % 3));
  const std::vector<PolicyKind> ps = {policies::GlobalStatic{0.0}};
  const auto rows = sweep(t, ps, seeded());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].metrics.hit_rate, 49.0 / 50.0);
}

TEST(Sweep, TighterDeltaDoesNotRaiseError) {
  SyntheticSpec spec;
  spec.num_records = 4000;
  spec.num_classes = 150;
  spec.dim = 32;
  const auto t = generate_synthetic(spec);
  const std::vector<PolicyKind> ps = {policies::VCacheVerified{0.01},
                                      policies::VCacheVerified{0.05}};
  const auto rows = sweep(t, ps, seeded(7));
  EXPECT_LE(rows[0].metrics.error_rate, rows[1].metrics.error_rate);
  EXPECT_LE(rows[0].metrics.hit_rate, rows[1].metrics.hit_rate + 0.02);
}

TEST(Curves, OneLinePerRequest) {
  const std::vector<TraceRecord> t = {labeled(1, EmbeddingVector{1, 0}, 4),
                                      labeled(2, EmbeddingVector{1, 0}, 4)};
  const std::vector<PolicyKind> ps = {policies::GlobalStatic{0.5}};
  std::ostringstream out;
  write_curves_csv(out, sweep(t, ps, seeded()));
  EXPECT_EQ(out.str(), "policy,parameter,step,error_rate,hit_rate\n"
            "gs,0.5,1,0.000000,0.000000\n"
            "gs,0.5,2,0.000000,0.500000\n");
}

#include "vcache/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace vcache {

namespace {

// Distribution code is written out over the raw mt19937_64 stream, whose
// output sequence is fixed by the standard; the std distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd gaussian(std::size_t dim) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synthetic trace needs at least 2 classes");
  if (spec.dim < 2) throw ConfigError("synthetic trace needs dim >= 2");
  if (!(spec.intra_class_noise >= 0.0) || !std::isfinite(spec.intra_class_noise)) {
    throw ConfigError("intra_class_noise must be nonnegative");
  }
  if (!(spec.zipf_exponent >= 0.0) || !std::isfinite(spec.zipf_exponent)) {
    throw ConfigError("zipf_exponent must be nonnegative");
  }
  if (spec.max_per_class > 0 && spec.max_per_class * spec.num_classes < spec.num_records) {
    throw ConfigError("max_per_class too small for num_records");
  }
}

std::vector<TraceRecord> generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  Rng rng(spec.rng_seed);

  std::vector<Eigen::VectorXd> prototypes;
  prototypes.reserve(spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    prototypes.push_back(rng.gaussian(spec.dim).normalized());
  }

  std::vector<double> weights(spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    weights[k] = std::pow(static_cast<double>(k + 1), -spec.zipf_exponent);
  }
  std::vector<std::size_t> counts(spec.num_classes, 0);
  auto draw_class = [&]() {
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (spec.max_per_class == 0 || counts[k] < spec.max_per_class) total += weights[k];
    }
    double u = rng.uniform() * total;
    std::size_t last_open = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (spec.max_per_class != 0 && counts[k] >= spec.max_per_class) continue;
      last_open = k;
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    return last_open;
  };

  std::vector<TraceRecord> records;
  records.reserve(spec.num_records);
  for (std::size_t i = 0; i < spec.num_records; ++i) {
    const std::size_t k = draw_class();
    ++counts[k];
    Eigen::VectorXd v = prototypes[k];
    if (spec.intra_class_noise > 0.0) {
      v += spec.intra_class_noise * rng.gaussian(spec.dim);
      v.normalize();
    }
    TraceRecord r;
    r.id = static_cast<std::int64_t>(i);
    r.prompt = "synthetic prompt " + std::to_string(i);
    r.embedding = EmbeddingVector(std::move(v));
    r.class_id = static_cast<std::int64_t>(k);
    r.gold_response = "class-" + std::to_string(k);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace vcache

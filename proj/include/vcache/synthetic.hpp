#pragma once

#include <cstdint>
#include <vector>

#include "vcache/trace.hpp"

namespace vcache {

/// Parameters of the synthetic labeled trace.
///
/// Class prototypes are uniform on the unit sphere. A record picks its class
/// i.i.d. from a Zipf law over class ranks, then takes the prototype plus
/// isotropic Gaussian noise (`intra_class_noise` per coordinate) and
/// re-normalizes.
struct SyntheticSpec {
  std::size_t num_records = 20000;
  std::size_t num_classes = 500;
  std::size_t dim = 64;
  double zipf_exponent = 1.1;
  /// Maximum records per class; 0 means unbounded. Full classes are skipped
  /// when sampling.
  std::size_t max_per_class = 0;
  double intra_class_noise = 0.1;
  std::uint64_t rng_seed = 7;
};

void validate_synthetic_spec(const SyntheticSpec& spec);

/// Records carry id (0-based position), a precomputed embedding, class_id
/// and gold_response "class-<class_id>".
std::vector<TraceRecord> generate_synthetic(const SyntheticSpec& spec);

}  // namespace vcache

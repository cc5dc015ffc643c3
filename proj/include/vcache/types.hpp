#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vcache {

// Error hierarchy. Everything the library throws derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

using EntryId = std::int64_t;

/// Fixed-dimension embedding E(x). Values are always finite.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(Eigen::VectorXd values);
  explicit EmbeddingVector(std::span<const double> values);
  EmbeddingVector(std::initializer_list<double> values);

  std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  std::vector<double> to_std() const;

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

/// One (similarity, correctness) pair recorded against a cached entry.
struct Observation {
  double similarity = 0.0;
  bool correct = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct CacheEntry {
  EntryId entry_id = 0;
  EmbeddingVector embedding;
  std::string response;
  std::vector<Observation> observations;  // append-only
  std::int64_t created_at_ms = 0;         // unix epoch, milliseconds

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

enum class Decision { Exploit, Explore };

const char* to_string(Decision d);

enum class IndexEngine { Exact, Hnsw };

/// How correctness labels c(x) are computed on explore.
enum class LabelMode { ExactMatch, Judge };

struct HnswParams {
  std::size_t m = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 128;
  std::uint64_t seed = 0x5eed;

  friend bool operator==(const HnswParams&, const HnswParams&) = default;
};

std::vector<double> default_epsilon_grid();

struct CacheConfig {
  double delta = 0.02;
  std::size_t min_observations = 4;
  std::vector<double> epsilon_grid = default_epsilon_grid();
  double gamma_max = 500.0;
  double l2_regularization = 1e-4;
  std::string similarity_metric = "cosine";
  std::optional<std::uint64_t> rng_seed;

  // Insert explored prompts even when c(x) = 1.
  bool insert_on_correct = false;
  LabelMode label_mode = LabelMode::ExactMatch;
  bool async_labeling = false;
  IndexEngine index_engine = IndexEngine::Exact;
  HnswParams hnsw;

  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

/// Returns config unchanged or throws ConfigError naming the violated bound.
const CacheConfig& validate_config(const CacheConfig& config);

}  // namespace vcache

#include "vcache/types.hpp"

#include <cmath>

namespace vcache {

namespace {

void require_finite(const Eigen::VectorXd& v) {
  if (!v.allFinite()) {
    throw Error("embedding contains non-finite values");
  }
}

}  // namespace

EmbeddingVector::EmbeddingVector(Eigen::VectorXd values) : values_(std::move(values)) {
  require_finite(values_);
}

EmbeddingVector::EmbeddingVector(std::span<const double> values)
    : values_(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                static_cast<Eigen::Index>(values.size()))) {
  require_finite(values_);
}

EmbeddingVector::EmbeddingVector(std::initializer_list<double> values)
    : EmbeddingVector(std::span<const double>(values.begin(), values.size())) {}

std::vector<double> EmbeddingVector::to_std() const {
  return {values_.data(), values_.data() + values_.size()};
}

const char* to_string(Decision d) {
  return d == Decision::Exploit ? "exploit" : "explore";
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  grid.reserve(99);
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  return grid;
}

const CacheConfig& validate_config(const CacheConfig& config) {
  if (!(config.delta > 0.0 && config.delta < 1.0)) {
    throw ConfigError("delta must be in (0,1)");
  }
  if (config.epsilon_grid.empty()) {
    throw ConfigError("epsilon_grid must not be empty");
  }
  for (std::size_t i = 0; i < config.epsilon_grid.size(); ++i) {
    double e = config.epsilon_grid[i];
    if (!(e > 0.0 && e < 1.0)) {
      throw ConfigError("epsilon_grid values must be in (0,1)");
    }
    if (i > 0 && !(e > config.epsilon_grid[i - 1])) {
      throw ConfigError("epsilon_grid must be strictly increasing");
    }
  }
  if (!(config.gamma_max > 0.0) || !std::isfinite(config.gamma_max)) {
    throw ConfigError("gamma_max must be positive");
  }
  if (!(config.l2_regularization >= 0.0) || !std::isfinite(config.l2_regularization)) {
    throw ConfigError("l2_regularization must be nonnegative");
  }
  if (config.similarity_metric != "cosine") {
    throw ConfigError("unsupported similarity metric: " + config.similarity_metric);
  }
  if (config.hnsw.m < 2 || config.hnsw.ef_search == 0 || config.hnsw.ef_construction == 0) {
    throw ConfigError("invalid HNSW parameters");
  }
  return config;
}

}  // namespace vcache

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "vcache/types.hpp"

using namespace vcache;

TEST(ValidateConfig, DefaultsAccepted) {
  CacheConfig c;
  EXPECT_EQ(c.delta, 0.02);
  ASSERT_EQ(c.epsilon_grid.size(), 99u);
  EXPECT_DOUBLE_EQ(c.epsilon_grid.front(), 0.01);
  EXPECT_DOUBLE_EQ(c.epsilon_grid.back(), 0.99);
  EXPECT_NO_THROW(validate_config(c));
  EXPECT_EQ(&validate_config(c), &c);
}

TEST(ValidateConfig, DeltaBounds) {
  CacheConfig c;
  c.delta = 0.0;
  try {
    validate_config(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "delta must be in (0,1)");
  }
  c.delta = 1.5;
  EXPECT_THROW(validate_config(c), ConfigError);
  c.delta = 1.0;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(ValidateConfig, GridAndGamma) {
  CacheConfig c;
  c.epsilon_grid = {};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.epsilon_grid = {0.1, 0.1};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.epsilon_grid = {0.0, 0.5};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.epsilon_grid = {0.5, 1.0};
  EXPECT_THROW(validate_config(c), ConfigError);
  c.epsilon_grid = {0.05};
  EXPECT_NO_THROW(validate_config(c));

  c.gamma_max = 0.0;
  EXPECT_THROW(validate_config(c), ConfigError);
  c.gamma_max = 10.0;
  c.l2_regularization = -1.0;
  EXPECT_THROW(validate_config(c), ConfigError);
  c.l2_regularization = 0.0;
  c.similarity_metric = "euclidean";
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(EmbeddingVector, RejectsNonFinite) {
  EXPECT_THROW(EmbeddingVector({1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
  EXPECT_THROW(EmbeddingVector({std::numeric_limits<double>::infinity()}), Error);
  EmbeddingVector v{1.0, 2.0, 3.0};
  EXPECT_EQ(v.dim(), 3u);
  EXPECT_EQ(v.to_std(), (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(v, EmbeddingVector(std::span<const double>(v.to_std())));
}

TEST(Decision, Names) {
  EXPECT_STREQ(to_string(Decision::Exploit), "exploit");
  EXPECT_STREQ(to_string(Decision::Explore), "explore");
}

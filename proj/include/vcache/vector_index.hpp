#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "vcache/types.hpp"

namespace vcache {

/// Cosine similarity dot(a,b)/(|a||b|), clamped to [-1,1].
/// Throws on zero-norm input or mismatched sizes.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine_similarity: dimension mismatch");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw Error("cosine_similarity: zero-norm vector");
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

struct Neighbor {
  EntryId entry_id = 0;
  double similarity = 0.0;
};

/// Nearest-neighbor store over unit-normalized embeddings.
///
/// Readers (nearest) run concurrently; inserts take an exclusive lock, so a
/// query sees the index either before or after an insert. The first insert
/// fixes the dimension. Ties on similarity go to the smallest entry id.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;

  void insert(EntryId id, const EmbeddingVector& v);

  /// Empty optional means "no neighbor" (the index is empty).
  std::optional<Neighbor> nearest(const EmbeddingVector& q) const;

  std::size_t size() const;
  std::size_t dim() const;
  bool contains(EntryId id) const;
  void clear();

  virtual IndexEngine engine() const = 0;

 protected:
  virtual void do_insert(EntryId id, const Eigen::VectorXd& unit) = 0;
  virtual std::optional<Neighbor> do_nearest(const Eigen::VectorXd& unit) const = 0;
  virtual void do_clear() = 0;

 private:
  mutable std::shared_mutex mutex_;
  std::size_t dim_ = 0;
  std::unordered_set<EntryId> ids_;
};

/// Brute-force scan; the reference engine.
class ExactIndex final : public VectorIndex {
 public:
  IndexEngine engine() const override { return IndexEngine::Exact; }

 protected:
  void do_insert(EntryId id, const Eigen::VectorXd& unit) override;
  std::optional<Neighbor> do_nearest(const Eigen::VectorXd& unit) const override;
  void do_clear() override;

 private:
  Eigen::MatrixXd vectors_;  // one unit vector per column, first `count_` valid
  std::vector<EntryId> ids_;
  Eigen::Index count_ = 0;
};

std::unique_ptr<VectorIndex> make_index(IndexEngine engine, const HnswParams& params = {});

}  // namespace vcache

#include "vcache/vector_index.hpp"

#include <mutex>
#include <string>

#include "vcache/hnsw_index.hpp"

namespace vcache {

namespace {

Eigen::VectorXd unit_vector(const EmbeddingVector& v) {
  const double n = v.values().norm();
  if (n == 0.0) {
    throw Error("cannot index a zero-norm embedding");
  }
  return v.values() / n;
}

}  // namespace

void VectorIndex::insert(EntryId id, const EmbeddingVector& v) {
  std::unique_lock lock(mutex_);
  if (v.dim() == 0) {
    throw DimensionMismatch("empty embedding");
  }
  if (dim_ != 0 && v.dim() != dim_) {
    throw DimensionMismatch("index dimension is " + std::to_string(dim_) +
                            ", got " + std::to_string(v.dim()));
  }
  if (ids_.contains(id)) {
    throw Error("duplicate entry id " + std::to_string(id));
  }
  Eigen::VectorXd unit = unit_vector(v);
  do_insert(id, unit);
  ids_.insert(id);
  dim_ = v.dim();
}

std::optional<Neighbor> VectorIndex::nearest(const EmbeddingVector& q) const {
  std::shared_lock lock(mutex_);
  if (ids_.empty()) return std::nullopt;
  if (q.dim() != dim_) {
    throw DimensionMismatch("query dimension is " + std::to_string(q.dim()) +
                            ", index dimension is " + std::to_string(dim_));
  }
  return do_nearest(unit_vector(q));
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mutex_);
  return ids_.size();
}

std::size_t VectorIndex::dim() const {
  std::shared_lock lock(mutex_);
  return dim_;
}

bool VectorIndex::contains(EntryId id) const {
  std::shared_lock lock(mutex_);
  return ids_.contains(id);
}

void VectorIndex::clear() {
  std::unique_lock lock(mutex_);
  do_clear();
  ids_.clear();
  dim_ = 0;
}

void ExactIndex::do_insert(EntryId id, const Eigen::VectorXd& unit) {
  if (count_ == 0 && vectors_.rows() != unit.size()) {
    vectors_.resize(unit.size(), 64);
  }
  if (count_ == vectors_.cols()) {
    vectors_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(64, 2 * vectors_.cols()));
  }
  vectors_.col(count_) = unit;
  ids_.push_back(id);
  ++count_;
}

std::optional<Neighbor> ExactIndex::do_nearest(const Eigen::VectorXd& unit) const {
  const Eigen::VectorXd scores = vectors_.leftCols(count_).transpose() * unit;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < count_; ++i) {
    if (scores[i] > scores[best] || (scores[i] == scores[best] && ids_[i] < ids_[best])) {
      best = i;
    }
  }
  return Neighbor{ids_[best], std::clamp(scores[best], -1.0, 1.0)};
}

void ExactIndex::do_clear() {
  vectors_.resize(0, 0);
  ids_.clear();
  count_ = 0;
}

std::unique_ptr<VectorIndex> make_index(IndexEngine engine, const HnswParams& params) {
  if (engine == IndexEngine::Hnsw) {
    return std::make_unique<HnswIndex>(params);
  }
  return std::make_unique<ExactIndex>();
}

}  // namespace vcache

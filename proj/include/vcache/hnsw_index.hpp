#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vcache/vector_index.hpp"

namespace vcache {

/// Hierarchical navigable small-world graph over unit vectors, scored by
/// inner product (cosine on normalized input).
///
/// Layer 0 holds every node with up to 2*M links; upper layers are sparser
/// with up to M links. Levels are drawn from a seeded generator, so the
/// graph built from the same insertion sequence is always the same.
class HnswIndex final : public VectorIndex {
 public:
  explicit HnswIndex(const HnswParams& params = {});

  IndexEngine engine() const override { return IndexEngine::Hnsw; }

 protected:
  void do_insert(EntryId id, const Eigen::VectorXd& unit) override;
  std::optional<Neighbor> do_nearest(const Eigen::VectorXd& unit) const override;
  void do_clear() override;

 private:
  using NodeId = std::uint32_t;

  struct Candidate {
    double similarity;
    NodeId node;
  };

  struct Node {
    EntryId entry_id;
    int level;
    std::vector<std::vector<NodeId>> links;  // links[layer]
  };

  double score(const Eigen::VectorXd& q, NodeId n) const {
    return vectors_.col(n).dot(q);
  }
  // Candidate ordering: higher similarity first, then smaller entry id.
  bool better(const Candidate& a, const Candidate& b) const;

  int draw_level();
  NodeId greedy_descend(const Eigen::VectorXd& q, NodeId start, int from_layer,
                        int to_layer) const;
  std::vector<Candidate> search_layer(const Eigen::VectorXd& q, NodeId entry,
                                      std::size_t ef, int layer) const;
  std::vector<NodeId> select_neighbors(std::vector<Candidate> candidates,
                                       std::size_t max_links) const;
  void shrink_links(NodeId node, int layer, std::size_t max_links);

  HnswParams params_;
  double level_mult_;
  std::mt19937_64 level_rng_;

  Eigen::MatrixXd vectors_;
  std::vector<Node> nodes_;
  NodeId entry_point_ = 0;
  int max_level_ = -1;
};

}  // namespace vcache

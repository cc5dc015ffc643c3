#include "vcache/hnsw_index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace vcache {

HnswIndex::HnswIndex(const HnswParams& params)
    : params_(params),
      level_mult_(1.0 / std::log(static_cast<double>(std::max<std::size_t>(params.m, 2)))),
      level_rng_(params.seed) {}

bool HnswIndex::better(const Candidate& a, const Candidate& b) const {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return nodes_[a.node].entry_id < nodes_[b.node].entry_id;
}

int HnswIndex::draw_level() {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = uniform(level_rng_);
  if (u <= 0.0) u = 1e-300;
  return static_cast<int>(std::floor(-std::log(u) * level_mult_));
}

HnswIndex::NodeId HnswIndex::greedy_descend(const Eigen::VectorXd& q, NodeId start,
                                            int from_layer, int to_layer) const {
  Candidate current{score(q, start), start};
  for (int layer = from_layer; layer > to_layer; --layer) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (NodeId next : nodes_[current.node].links[layer]) {
        Candidate c{score(q, next), next};
        if (better(c, current)) {
          current = c;
          moved = true;
        }
      }
    }
  }
  return current.node;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const Eigen::VectorXd& q,
                                                          NodeId entry, std::size_t ef,
                                                          int layer) const {
  auto worse_first = [this](const Candidate& a, const Candidate& b) { return better(a, b); };
  auto best_first = [this](const Candidate& a, const Candidate& b) { return better(b, a); };

  std::vector<char> visited(nodes_.size(), 0);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(best_first)> frontier(best_first);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse_first)> results(worse_first);

  Candidate start{score(q, entry), entry};
  visited[entry] = 1;
  frontier.push(start);
  results.push(start);

  while (!frontier.empty()) {
    Candidate c = frontier.top();
    if (results.size() >= ef && better(results.top(), c)) break;
    frontier.pop();
    for (NodeId next : nodes_[c.node].links[layer]) {
      if (visited[next]) continue;
      visited[next] = 1;
      Candidate n{score(q, next), next};
      if (results.size() < ef || better(n, results.top())) {
        frontier.push(n);
        results.push(n);
        if (results.size() > ef) results.pop();
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());  // best first
  return out;
}

// Diversity heuristic: keep a candidate only if it is closer to the query
// than to every neighbor already kept; fill remaining slots with the best
// of the discarded ones.
std::vector<HnswIndex::NodeId> HnswIndex::select_neighbors(std::vector<Candidate> candidates,
                                                           std::size_t max_links) const {
  std::sort(candidates.begin(), candidates.end(),
            [this](const Candidate& a, const Candidate& b) { return better(a, b); });
  std::vector<NodeId> kept;
  std::vector<NodeId> skipped;
  for (const Candidate& c : candidates) {
    if (kept.size() >= max_links) break;
    bool diverse = true;
    for (NodeId k : kept) {
      if (vectors_.col(c.node).dot(vectors_.col(k)) > c.similarity) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : skipped).push_back(c.node);
  }
  for (NodeId s : skipped) {
    if (kept.size() >= max_links) break;
    kept.push_back(s);
  }
  return kept;
}

void HnswIndex::shrink_links(NodeId node, int layer, std::size_t max_links) {
  auto& links = nodes_[node].links[layer];
  if (links.size() <= max_links) return;
  std::vector<Candidate> candidates;
  candidates.reserve(links.size());
  for (NodeId n : links) {
    candidates.push_back({vectors_.col(node).dot(vectors_.col(n)), n});
  }
  links = select_neighbors(std::move(candidates), max_links);
}

void HnswIndex::do_insert(EntryId id, const Eigen::VectorXd& unit) {
  const auto node = static_cast<NodeId>(nodes_.size());
  if (node == 0) {
    vectors_.resize(unit.size(), 64);
  } else if (static_cast<Eigen::Index>(node) == vectors_.cols()) {
    vectors_.conservativeResize(Eigen::NoChange, 2 * vectors_.cols());
  }
  vectors_.col(node) = unit;

  const int level = draw_level();
  nodes_.push_back(Node{id, level, std::vector<std::vector<NodeId>>(level + 1)});

  if (max_level_ < 0) {
    entry_point_ = node;
    max_level_ = level;
    return;
  }

  NodeId entry = greedy_descend(unit, entry_point_, max_level_, level);
  for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
    auto candidates = search_layer(unit, entry, params_.ef_construction, layer);
    const std::size_t max_links = layer == 0 ? 2 * params_.m : params_.m;
    auto chosen = select_neighbors(candidates, params_.m);
    nodes_[node].links[layer] = chosen;
    for (NodeId other : chosen) {
      nodes_[other].links[layer].push_back(node);
      shrink_links(other, layer, max_links);
    }
    entry = candidates.front().node;
  }

  if (level > max_level_) {
    max_level_ = level;
    entry_point_ = node;
  }
}

std::optional<Neighbor> HnswIndex::do_nearest(const Eigen::VectorXd& unit) const {
  if (nodes_.empty()) return std::nullopt;
  NodeId entry = greedy_descend(unit, entry_point_, max_level_, 0);
  auto found = search_layer(unit, entry, std::max<std::size_t>(params_.ef_search, 1), 0);
  const Candidate& best = found.front();
  return Neighbor{nodes_[best.node].entry_id, std::clamp(best.similarity, -1.0, 1.0)};
}

void HnswIndex::do_clear() {
  vectors_.resize(0, 0);
  nodes_.clear();
  entry_point_ = 0;
  max_level_ = -1;
  level_rng_.seed(params_.seed);
}

}  // namespace vcache

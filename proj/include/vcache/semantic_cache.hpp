#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "vcache/backends.hpp"
#include "vcache/equivalence.hpp"
#include "vcache/policy.hpp"
#include "vcache/sigmoid.hpp"
#include "vcache/types.hpp"
#include "vcache/vector_index.hpp"

namespace vcache {

struct RequestTimings {
  double embed_ms = 0.0;
  double nn_ms = 0.0;
  double policy_ms = 0.0;
  std::optional<double> llm_ms;  // absent when no chat call was made
  double total_ms = 0.0;
};

struct RequestOutcome {
  std::uint64_t request_seq = 0;
  std::string response;
  Decision action = Decision::Explore;
  std::optional<EntryId> entry_id_served;    // set on Exploit
  std::optional<EntryId> neighbor_id;        // nn(x), when the cache was nonempty
  std::optional<double> similarity;          // s(x), when the cache was nonempty
  std::optional<TauResult> tau;              // randomized policies only
  std::optional<bool> correctness_label;     // synchronous explore with a neighbor
  std::optional<EntryId> inserted_entry_id;  // synchronous explore that grew the cache
  RequestTimings timings;
};

struct CacheBackends {
  EmbeddingBackend& embedding;
  ChatBackend& chat;
  /// Required when the cache labels with LabelMode::Judge.
  ChatBackend* judge = nullptr;
};

/// Counters since construction. Exploits count as true positives unless
/// adjudicated otherwise via SemanticCache::adjudicate_exploit; in live
/// serving the correctness of a hit is not observed.
struct CacheStats {
  std::uint64_t n = 0;
  std::uint64_t exploits = 0;
  std::uint64_t explores = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t labeled = 0;
  std::uint64_t pending_labels = 0;
  std::uint64_t label_failures = 0;
  std::size_t entries = 0;
  double hit_rate = 0.0;
  double error_rate = 0.0;
};

/// Plain data view of the persistent part of a cache.
struct CacheState {
  CacheConfig config;
  std::vector<CacheEntry> entries;  // ascending entry_id
  std::vector<Observation> global_observations;
  EntryId next_entry_id = 1;

  friend bool operator==(const CacheState&, const CacheState&) = default;
};

/// The semantic cache: embed, look up the nearest entry, ask the policy,
/// then either serve the cached response or call the model and record
/// what the neighbor would have been worth.
///
/// Thread safety: request() may be called concurrently. Index reads run in
/// parallel; observation appends and insertions are serialized. With
/// async_labeling, labeling and the resulting writes run on one background
/// worker in request order.
class SemanticCache {
 public:
  SemanticCache(CacheConfig config, PolicyKind policy);
  SemanticCache(CacheState state, PolicyKind policy);
  ~SemanticCache();

  SemanticCache(const SemanticCache&) = delete;
  SemanticCache& operator=(const SemanticCache&) = delete;

  /// Runs one request end to end. Backend failures propagate and leave the
  /// cache (including its counters) untouched.
  RequestOutcome request(const Prompt& prompt, const CacheBackends& backends);

  /// Marks an earlier exploit as incorrect (moves it from tp to fp) or
  /// confirms it. Used when ground truth is known.
  void adjudicate_exploit(bool correct);

  CacheStats stats() const;
  CacheState export_state() const;
  std::size_t entry_count() const;
  std::optional<CacheEntry> entry(EntryId id) const;
  std::optional<Neighbor> nearest(const EmbeddingVector& v) const;
  std::vector<Observation> global_observations() const;

  /// Blocks until queued asynchronous labels have committed.
  void drain();
  /// Drops every entry and observation. Counters are kept.
  void clear();

  const CacheConfig& config() const { return config_; }
  const PolicyKind& policy() const { return policy_; }

  /// Replaces the judge template used in LabelMode::Judge.
  void set_judge_template(JudgeTemplate t);

 private:
  struct EntrySlot {
    CacheEntry entry;
    SigmoidFit fit;
  };

  struct LabelTask {
    std::string prompt_text;
    EmbeddingVector embedding;
    std::string fresh_response;
    std::string cached_response;
    EntryId neighbor = 0;
    double similarity = 0.0;
    ChatBackend* judge = nullptr;
  };

  struct Commit {
    bool correct = false;
    std::optional<EntryId> inserted;
  };

  double next_draw();
  EquivalenceVerdict label(const LabelTask& task) const;
  Commit commit(const LabelTask& task, bool correct);
  EntryId insert_entry(const EmbeddingVector& embedding, std::string response);
  void refit(EntrySlot& slot) const;
  void worker_loop();
  enum class LabelState { None, Pending, Committed };
  std::uint64_t count(Decision d, LabelState label);

  CacheConfig config_;
  PolicyKind policy_;
  double delta_;
  EpsilonGrid grid_;
  JudgeTemplate judge_template_ = JudgeTemplate::builtin();

  std::unique_ptr<VectorIndex> index_;
  mutable std::shared_mutex state_mutex_;
  std::map<EntryId, EntrySlot> entries_;
  std::vector<Observation> global_observations_;
  SigmoidFit global_fit_;
  EntryId next_entry_id_ = 1;

  std::mutex rng_mutex_;
  std::mt19937_64 rng_;

  mutable std::mutex stats_mutex_;
  CacheStats counters_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<LabelTask> queue_;
  bool worker_busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace vcache

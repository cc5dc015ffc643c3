#include "vcache/semantic_cache.hpp"

#include <chrono>

namespace vcache {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::int64_t now_epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// The policy's own delta wins over the config default.
CacheConfig align_delta(CacheConfig config, const PolicyKind& policy) {
  validate_policy(policy);
  if (const auto* p = std::get_if<policies::VCacheVerified>(&policy)) config.delta = p->delta;
  if (const auto* p = std::get_if<policies::GlobalDynamic>(&policy)) config.delta = p->delta;
  if (const auto* p = std::get_if<policies::LocalSigmoid>(&policy)) config.delta = p->delta;
  validate_config(config);
  return config;
}

std::uint64_t seed_from(const CacheConfig& config) {
  if (config.rng_seed) return *config.rng_seed;
  return (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
}

}  // namespace

SemanticCache::SemanticCache(CacheConfig config, PolicyKind policy)
    : config_(align_delta(std::move(config), policy)),
      policy_(policy),
      delta_(config_.delta),
      grid_(config_.epsilon_grid),
      index_(make_index(config_.index_engine, config_.hnsw)),
      rng_(seed_from(config_)) {
  if (config_.async_labeling) worker_ = std::thread([this] { worker_loop(); });
}

SemanticCache::SemanticCache(CacheState state, PolicyKind policy)
    : SemanticCache(std::move(state.config), std::move(policy)) {
  for (auto& e : state.entries) {
    if (e.entry_id >= state.next_entry_id) {
      throw Error("cache state: entry id " + std::to_string(e.entry_id) +
                  " is not below next_entry_id");
    }
    const EntryId id = e.entry_id;
    index_->insert(id, e.embedding);
    EntrySlot slot{std::move(e), {}};
    refit(slot);
    if (!entries_.emplace(id, std::move(slot)).second) {
      throw Error("cache state: duplicate entry id " + std::to_string(id));
    }
  }
  global_observations_ = std::move(state.global_observations);
  if (!global_observations_.empty() && global_observations_.size() >= config_.min_observations) {
    global_fit_ = fit_logistic(global_observations_, config_.l2_regularization, config_.gamma_max);
  }
  next_entry_id_ = state.next_entry_id;
}

SemanticCache::~SemanticCache() {
  if (worker_.joinable()) {
    {
      std::lock_guard lock(queue_mutex_);
      stopping_ = true;
    }
    queue_cv_.notify_all();
    worker_.join();
  }
}

void SemanticCache::set_judge_template(JudgeTemplate t) { judge_template_ = std::move(t); }

double SemanticCache::next_draw() {
  std::lock_guard lock(rng_mutex_);
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;  // [0, 1)
}

void SemanticCache::refit(EntrySlot& slot) const {
  const auto& obs = slot.entry.observations;
  if (obs.empty() || obs.size() < config_.min_observations) {
    slot.fit = SigmoidFit{};
    return;
  }
  slot.fit = fit_logistic(obs, config_.l2_regularization, config_.gamma_max);
}

EntryId SemanticCache::insert_entry(const EmbeddingVector& embedding, std::string response) {
  // Caller holds state_mutex_ exclusively.
  const EntryId id = next_entry_id_;
  index_->insert(id, embedding);
  ++next_entry_id_;
  CacheEntry entry{id, embedding, std::move(response), {}, now_epoch_ms()};
  entries_.emplace(id, EntrySlot{std::move(entry), SigmoidFit{}});
  return id;
}

EquivalenceVerdict SemanticCache::label(const LabelTask& task) const {
  if (config_.label_mode == LabelMode::Judge) {
    if (task.judge == nullptr) throw ConfigError("judge labeling requires a judge backend");
    return judge_equivalence(task.prompt_text, task.fresh_response, task.cached_response,
                             *task.judge, judge_template_);
  }
  return exact_match(task.fresh_response, task.cached_response);
}

SemanticCache::Commit SemanticCache::commit(const LabelTask& task, bool correct) {
  Commit out{correct, std::nullopt};
  std::unique_lock lock(state_mutex_);
  auto it = entries_.find(task.neighbor);
  if (it == entries_.end()) return out;  // cleared while the label was in flight
  it->second.entry.observations.push_back({task.similarity, correct});
  refit(it->second);
  if (std::holds_alternative<policies::GlobalDynamic>(policy_)) {
    global_observations_.push_back({task.similarity, correct});
    if (global_observations_.size() >= config_.min_observations) {
      global_fit_ =
          fit_logistic(global_observations_, config_.l2_regularization, config_.gamma_max);
    }
  }
  if (!correct || config_.insert_on_correct) {
    out.inserted = insert_entry(task.embedding, task.fresh_response);
  }
  return out;
}

std::uint64_t SemanticCache::count(Decision d, LabelState label) {
  std::lock_guard lock(stats_mutex_);
  ++counters_.n;
  if (d == Decision::Exploit) {
    ++counters_.exploits;
    ++counters_.tp;
  } else {
    ++counters_.explores;
  }
  if (label == LabelState::Pending) ++counters_.pending_labels;
  if (label == LabelState::Committed) ++counters_.labeled;
  return counters_.n;
}

RequestOutcome SemanticCache::request(const Prompt& prompt, const CacheBackends& backends) {
  if (prompt.text.empty()) throw Error("empty prompt");
  const auto start = Clock::now();
  RequestOutcome out;

  auto phase = Clock::now();
  EmbeddingVector embedding = backends.embedding.embed(prompt);
  out.timings.embed_ms = ms_since(phase);

  phase = Clock::now();
  std::optional<Neighbor> nn = index_->nearest(embedding);
  out.timings.nn_ms = ms_since(phase);

  phase = Clock::now();
  std::string cached;
  SigmoidFit fit;
  std::size_t observation_count = 0;
  if (nn) {
    std::shared_lock lock(state_mutex_);
    auto it = entries_.find(nn->entry_id);
    if (it == entries_.end()) {
      nn.reset();  // cleared concurrently
    } else {
      cached = it->second.entry.response;
      if (std::holds_alternative<policies::GlobalDynamic>(policy_)) {
        fit = global_fit_;
        observation_count = global_observations_.size();
      } else {
        fit = it->second.fit;
        observation_count = it->second.entry.observations.size();
      }
    }
  }

  if (!nn) {
    phase = Clock::now();
    std::string fresh = backends.chat.generate(prompt);
    out.timings.llm_ms = ms_since(phase);
    {
      std::unique_lock lock(state_mutex_);
      out.inserted_entry_id = insert_entry(embedding, fresh);
    }
    out.response = std::move(fresh);
    out.action = Decision::Explore;
    out.request_seq = count(Decision::Explore, LabelState::None);
    out.timings.total_ms = ms_since(start);
    return out;
  }

  out.neighbor_id = nn->entry_id;
  out.similarity = nn->similarity;

  const double s = nn->similarity;
  const Decision decision = std::visit(
      [&](const auto& p) -> Decision {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, policies::GlobalStatic>) {
          return decide_static(s, p.threshold);
        } else if constexpr (std::is_same_v<P, policies::LocalHardThreshold>) {
          return decide_ld1_with_fit(s, fit, observation_count, config_.min_observations);
        } else if constexpr (std::is_same_v<P, policies::LocalSigmoid>) {
          return decide_ld2_with_fit(s, fit, observation_count, delta_, config_.min_observations);
        } else {
          const VCacheDecision d = decide_vcache_with_fit(
              s, fit, observation_count, delta_, config_.min_observations, grid_, next_draw());
          out.tau = d.tau;
          return d.decision;
        }
      },
      policy_);
  out.timings.policy_ms = ms_since(phase);
  out.action = decision;

  if (decision == Decision::Exploit) {
    out.response = std::move(cached);
    out.entry_id_served = nn->entry_id;
    out.request_seq = count(Decision::Exploit, LabelState::None);
    out.timings.total_ms = ms_since(start);
    return out;
  }

  phase = Clock::now();
  std::string fresh = backends.chat.generate(prompt);
  out.timings.llm_ms = ms_since(phase);

  LabelTask task{prompt.text, std::move(embedding), fresh, std::move(cached),
                 nn->entry_id, s, backends.judge};

  if (config_.async_labeling) {
    // Counted before queueing so the worker never sees pending_labels at zero.
    out.request_seq = count(Decision::Explore, LabelState::Pending);
    {
      std::lock_guard lock(queue_mutex_);
      queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
  } else {
    const EquivalenceVerdict verdict = label(task);
    const Commit committed = commit(task, verdict.equal);
    out.correctness_label = committed.correct;
    out.inserted_entry_id = committed.inserted;
    out.request_seq = count(Decision::Explore, LabelState::Committed);
  }
  out.response = std::move(fresh);
  out.timings.total_ms = ms_since(start);
  return out;
}

void SemanticCache::worker_loop() {
  for (;;) {
    LabelTask task;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
      worker_busy_ = true;
    }
    bool ok = true;
    try {
      const EquivalenceVerdict verdict = label(task);
      commit(task, verdict.equal);
    } catch (const std::exception&) {
      ok = false;
    }
    {
      std::lock_guard lock(stats_mutex_);
      --counters_.pending_labels;
      (ok ? counters_.labeled : counters_.label_failures)++;
    }
    {
      std::lock_guard lock(queue_mutex_);
      worker_busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

void SemanticCache::drain() {
  if (!config_.async_labeling) return;
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && !worker_busy_; });
}

void SemanticCache::adjudicate_exploit(bool correct) {
  if (correct) return;
  std::lock_guard lock(stats_mutex_);
  if (counters_.tp == 0) throw Error("adjudicate_exploit: no exploit left to reclassify");
  --counters_.tp;
  ++counters_.fp;
}

CacheStats SemanticCache::stats() const {
  const std::size_t entries = entry_count();
  std::lock_guard lock(stats_mutex_);
  CacheStats s = counters_;
  s.entries = entries;
  if (s.n > 0) {
    s.hit_rate = static_cast<double>(s.tp + s.fp) / static_cast<double>(s.n);
    s.error_rate = static_cast<double>(s.fp) / static_cast<double>(s.n);
  }
  return s;
}

CacheState SemanticCache::export_state() const {
  std::shared_lock lock(state_mutex_);
  CacheState state{config_, {}, global_observations_, next_entry_id_};
  state.entries.reserve(entries_.size());
  for (const auto& [id, slot] : entries_) state.entries.push_back(slot.entry);
  return state;
}

std::size_t SemanticCache::entry_count() const {
  std::shared_lock lock(state_mutex_);
  return entries_.size();
}

std::optional<CacheEntry> SemanticCache::entry(EntryId id) const {
  std::shared_lock lock(state_mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.entry;
}

std::optional<Neighbor> SemanticCache::nearest(const EmbeddingVector& v) const {
  return index_->nearest(v);
}

std::vector<Observation> SemanticCache::global_observations() const {
  std::shared_lock lock(state_mutex_);
  return global_observations_;
}

void SemanticCache::clear() {
  drain();
  std::unique_lock lock(state_mutex_);
  entries_.clear();
  index_->clear();
  global_observations_.clear();
  global_fit_ = SigmoidFit{};
}

}  // namespace vcache

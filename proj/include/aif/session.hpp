#pragma once

// Live number-entry sessions: an agent asks a human "above or below c?"
// until it commits. Each session keeps an ordered, replayable event log.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aif/agent.hpp"
#include "aif/error.hpp"
#include "aif/model_io.hpp"
#include "aif/number_entry.hpp"

namespace aif::session {

enum class Phase { kAwaitingResponse, kQuerying, kCommitted, kAborted };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kAwaitingResponse: return "awaiting_response";
    case Phase::kQuerying: return "querying";
    case Phase::kCommitted: return "committed";
    case Phase::kAborted: return "aborted";
  }
  return "?";
}

struct SessionConfig {
  number_entry::Config task;
  PlanConfig plan = number_entry::default_plan();
  std::uint64_t seed = 0;
};

/// Overrides accepted by create: N, epsilon, epsilon_grid, seed, horizon,
/// precision, max_steps. epsilon is the simulated flip rate applied to the
/// human's answers; the agent's grid defaults to {epsilon}.
inline SessionConfig config_from_overrides(const nlohmann::json& j, std::uint64_t default_seed) {
  SessionConfig cfg;
  cfg.seed = default_seed;
  cfg.task.N = 16;
  cfg.task.epsilon_true = 0.0;
  if (j.is_null()) {
    cfg.task.epsilon_grid = {0.0};
    return cfg;
  }
  auto invalid = [](const std::string& what) { return Error(ErrorCode::kInvalidConfig, what); };
  if (!j.is_object()) throw invalid("session overrides must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    static const std::set<std::string> known = {"N", "epsilon", "epsilon_grid", "seed", "horizon", "precision", "max_steps"};
    if (!known.count(k)) throw invalid("unknown session key '" + k + "'");
  }
  auto count = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw invalid(std::string(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  };
  if (j.contains("N")) cfg.task.N = count("N");
  if (j.contains("seed")) cfg.seed = count("seed");
  if (j.contains("horizon")) cfg.plan.horizon = count("horizon");
  if (j.contains("max_steps")) cfg.task.max_steps = count("max_steps");
  if (j.contains("epsilon")) {
    if (!j["epsilon"].is_number()) throw invalid("epsilon must be a number");
    cfg.task.epsilon_true = j["epsilon"].get<double>();
  }
  if (j.contains("precision")) {
    const auto& v = j["precision"];
    if (v.is_string() && (v == "inf" || v == "greedy")) cfg.plan.precision = std::numeric_limits<double>::infinity();
    else if (v.is_number() && v.get<double>() > 0.0) cfg.plan.precision = v.get<double>();
    else throw invalid("precision must be positive or \"inf\"");
  }
  cfg.task.epsilon_grid = {cfg.task.epsilon_true};
  if (j.contains("epsilon_grid")) {
    try {
      cfg.task.epsilon_grid = detail::json_numbers(j["epsilon_grid"], "epsilon_grid");
    } catch (const Error& e) {
      throw invalid(e.what());
    }
  }
  if (cfg.plan.horizon == 0) throw invalid("horizon must be at least 1");
  number_entry::validate(cfg.task);
  return cfg;
}

/// One live session. Not thread-safe on its own; the manager serializes
/// access per session.
class Session {
 public:
  explicit Session(SessionConfig cfg)
      : cfg_(std::move(cfg)), layout_(cfg_.task), flip_rng_(derive_seed(cfg_.seed, 1)) {
    AgentConfig ac;
    ac.plan = cfg_.plan;
    ac.seed = derive_seed(cfg_.seed, 0);
    agent_ = std::make_unique<Agent>(number_entry::build_model(cfg_.task), ac);
    nlohmann::json created{{"type", "created"},
                           {"N", cfg_.task.N},
                           {"epsilon", cfg_.task.epsilon_true},
                           {"epsilon_grid", cfg_.task.epsilon_grid},
                           {"horizon", cfg_.plan.horizon},
                           {"seed", cfg_.seed}};
    advance(std::nullopt, created);
  }

  const SessionConfig& config() const noexcept { return cfg_; }
  Phase phase() const noexcept { return phase_; }
  const std::vector<nlohmann::json>& events() const noexcept { return events_; }
  std::optional<std::size_t> cutpoint() const noexcept { return cutpoint_; }
  std::optional<std::size_t> committed() const noexcept { return committed_; }
  std::size_t queries() const noexcept { return flips_.size(); }
  /// The agent's trace; empty once the session has ended and released it.
  const EpisodeTrace& trace() const noexcept { return trace_; }

  /// `above` is the human's answer to the outstanding query.
  void respond(bool above) {
    if (phase_ != Phase::kQuerying) {
      throw Error(ErrorCode::kWrongPhase, "session is " + std::string(to_string(phase_)) + ", not querying");
    }
    phase_ = Phase::kAwaitingResponse;
    const bool flip = flip_rng_.bernoulli(cfg_.task.epsilon_true);
    flips_.push_back(flip);
    push({{"type", "response"}, {"bit", above ? "above" : "below"}, {"query", flips_.size()}});
    const std::size_t obs = (above != flip) ? number_entry::kAbove : number_entry::kBelow;
    advance(obs, std::nullopt);
  }

  void abort(const std::string& reason) {
    if (phase_ == Phase::kCommitted || phase_ == Phase::kAborted) {
      throw Error(ErrorCode::kWrongPhase, "session already " + std::string(to_string(phase_)));
    }
    phase_ = Phase::kAborted;
    push({{"type", "aborted"}, {"reason", reason}});
    release();
  }

 private:
  static double sum_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  nlohmann::json describe(std::size_t action) const {
    if (layout_.is_ask(action)) return {{"kind", "ask"}, {"cutpoint", layout_.cutpoint_of(action)}};
    return {{"kind", "commit"}, {"n", layout_.target_of(action)}};
  }

  // Best policy per first action, in action order.
  nlohmann::json efe_rows() const {
    const auto& ps = agent_->last_scored();
    std::vector<std::optional<std::size_t>> best(agent_->model().num_actions);
    for (std::size_t i = 0; i < ps.policies.size(); ++i) {
      auto& b = best[ps.policies[i].actions.front()];
      if (!b || ps.efes[i] < ps.efes[*b]) b = i;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < best.size(); ++a) {
      if (!best[a]) continue;
      const auto& br = ps.breakdowns[*best[a]];
      auto row = describe(a);
      row["action"] = a;
      row["value"] = ps.efes[*best[a]];
      row["info_gain"] = sum_mean(br.info_gain);
      row["pragmatic"] = sum_mean(br.pragmatic);
      rows.push_back(std::move(row));
    }
    return rows;
  }

  nlohmann::json belief_json(const Belief& b) const {
    const auto marginal = number_entry::target_marginal(b.dist, cfg_.task);
    return {{"dist", marginal}, {"entropy", entropy(std::span<const double>(marginal))}};
  }

  // One agent step; `created` set only for the opening step, which folds
  // the initial belief and EFE table into the created event.
  void advance(std::optional<std::size_t> obs, std::optional<nlohmann::json> created) {
    const auto action = agent_->step(obs);
    const auto& rec = agent_->trace().steps.back();
    if (created) {
      (*created)["belief"] = belief_json(rec.posterior);
      (*created)["efe"] = efe_rows();
      push(std::move(*created));
    } else {
      auto b = belief_json(rec.posterior);
      b["type"] = "belief";
      push(std::move(b));
      push({{"type", "efe"}, {"rows", efe_rows()}});
    }
    if (layout_.is_ask(action)) {
      if (agent_->step_count() >= cfg_.task.max_steps) {
        phase_ = Phase::kAborted;
        push({{"type", "aborted"}, {"reason", "max_steps"}});
        release();
        return;
      }
      cutpoint_ = layout_.cutpoint_of(action);
      phase_ = Phase::kQuerying;
      push({{"type", "query"}, {"cutpoint", *cutpoint_}, {"query", flips_.size() + 1}});
      return;
    }
    committed_ = layout_.target_of(action);
    cutpoint_.reset();
    phase_ = Phase::kCommitted;
    push({{"type", "commit"}, {"n", *committed_}, {"queries", flips_.size()}});
    for (std::size_t i = 0; i < flips_.size(); ++i) push({{"type", "flipped"}, {"query", i + 1}, {"flipped", bool(flips_[i])}});
    release();
  }

  void push(nlohmann::json e) {
    e["seq"] = events_.size();
    events_.push_back(std::move(e));
  }

  void release() {
    trace_ = agent_->trace();
    agent_.reset();
  }

  SessionConfig cfg_;
  number_entry::Layout layout_;
  Rng flip_rng_;
  std::unique_ptr<Agent> agent_;
  EpisodeTrace trace_;
  Phase phase_ = Phase::kAwaitingResponse;
  std::optional<std::size_t> cutpoint_;
  std::optional<std::size_t> committed_;
  std::vector<bool> flips_;
  std::vector<nlohmann::json> events_;
};

struct ManagerConfig {
  double ttl_seconds = 900.0;
  std::size_t max_sessions = 256;
};

/// Thread-safe registry. Idle sessions past the TTL are aborted (later
/// calls on them raise Gone); finished sessions are evicted oldest-first
/// when the limit is reached.
class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SessionManager(ManagerConfig cfg = {}, std::function<Clock::time_point()> now = Clock::now)
      : cfg_(cfg), now_(std::move(now)) {}

  struct Created {
    std::string id;
    std::vector<nlohmann::json> events;
  };

  Created create(const nlohmann::json& overrides = nullptr) {
    auto cfg = config_from_overrides(overrides, next_seed_.fetch_add(1));
    auto entry = std::make_shared<Entry>(Session(std::move(cfg)), now_());
    std::lock_guard lock(mu_);
    sweep_locked();
    if (sessions_.size() >= cfg_.max_sessions) evict_locked();
    auto id = fresh_id_locked();
    sessions_.emplace(id, entry);
    order_.push_back(id);
    return {id, entry->session.events()};
  }

  /// New events produced by the response, in order.
  std::vector<nlohmann::json> post_response(const std::string& id, bool above) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    check_alive(*e, id);
    const auto before = e->session.events().size();
    e->session.respond(above);
    e->last_activity = now_();
    const auto& ev = e->session.events();
    return {ev.begin() + static_cast<std::ptrdiff_t>(before), ev.end()};
  }

  /// Events from index `from` on.
  std::vector<nlohmann::json> events(const std::string& id, std::size_t from = 0) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    expire_if_idle(*e);
    const auto& ev = e->session.events();
    if (from >= ev.size()) return {};
    return {ev.begin() + static_cast<std::ptrdiff_t>(from), ev.end()};
  }

  void abort(const std::string& id, const std::string& reason = "client") {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    check_alive(*e, id);
    e->session.abort(reason);
  }

  Phase phase(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    expire_if_idle(*e);
    return e->session.phase();
  }

  /// Copy of the agent trace; available once the session has ended.
  EpisodeTrace trace(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return e->session.trace();
  }

  /// Aborts idle sessions; returns how many.
  std::size_t sweep() {
    std::lock_guard lock(mu_);
    return sweep_locked();
  }

  std::size_t size() {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Entry {
    Entry(Session s, Clock::time_point t) : session(std::move(s)), last_activity(t) {}
    std::mutex mu;
    Session session;
    Clock::time_point last_activity;
    bool expired = false;
  };

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, "no session '" + id + "'");
    return it->second;
  }

  bool idle(const Entry& e) const {
    return std::chrono::duration<double>(now_() - e.last_activity).count() > cfg_.ttl_seconds;
  }

  void expire_if_idle(Entry& e) {
    const auto p = e.session.phase();
    if (p == Phase::kCommitted || p == Phase::kAborted || !idle(e)) return;
    e.session.abort("ttl");
    e.expired = true;
  }

  void check_alive(Entry& e, const std::string& id) {
    expire_if_idle(e);
    if (e.expired) throw Error(ErrorCode::kGone, "session '" + id + "' expired");
  }

  std::size_t sweep_locked() {
    std::size_t n = 0;
    for (auto& [id, e] : sessions_) {
      std::lock_guard lock(e->mu);
      if (e->expired) continue;
      expire_if_idle(*e);
      n += e->expired ? 1 : 0;
    }
    return n;
  }

  void evict_locked() {
    for (auto it = order_.begin(); it != order_.end(); ++it) {
      auto& e = sessions_.at(*it);
      std::lock_guard lock(e->mu);
      const auto p = e->session.phase();
      if (p == Phase::kCommitted || p == Phase::kAborted) {
        sessions_.erase(*it);
        order_.erase(it);
        return;
      }
    }
    throw Error(ErrorCode::kCapacity, "session limit of " + std::to_string(cfg_.max_sessions) + " reached");
  }

  std::string fresh_id_locked() {
    static const char* hex = "0123456789abcdef";
    for (;;) {
      std::string id;
      for (int i = 0; i < 4; ++i) {
        auto w = id_source_();
        for (int k = 0; k < 8; ++k, w >>= 4) id.push_back(hex[w & 0xf]);
      }
      if (!sessions_.count(id)) return id;
    }
  }

  ManagerConfig cfg_;
  std::function<Clock::time_point()> now_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::vector<std::string> order_;
  std::atomic<std::uint64_t> next_seed_{0};
  std::random_device id_source_;
};

}  // namespace aif::session

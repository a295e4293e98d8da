#pragma once

// Number selection over a corrupted binary channel. The user thinks of a
// number n in [0, N); the agent shows a cutpoint c and hears back whether
// n >= c ("above") or not ("below"), with each answer flipped independently
// with probability epsilon. The agent asks until it prefers to commit.
//
// Model layout (all indices zero-based):
//   states        live (n, e) at n * G + e for e indexing epsilon_grid,
//                 then DONE_CORRECT = N*G, DONE_WRONG = N*G + 1
//   actions       ask(c) at c - 1 for c in 1..N-1, commit(n) at N - 1 + n
//   observations  below = 0, above = 1, committed = 2

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aif/agent.hpp"
#include "aif/error.hpp"
#include "aif/genmodel.hpp"
#include "aif/planning.hpp"
#include "aif/probmath.hpp"
#include "aif/rng.hpp"

namespace aif::number_entry {

inline constexpr std::size_t kBelow = 0;
inline constexpr std::size_t kAbove = 1;
inline constexpr std::size_t kCommitted = 2;

struct Config {
  std::size_t N = 16;
  double epsilon_true = 0.0;
  std::vector<double> epsilon_grid = {0.0, 0.1, 0.2, 0.3};
  /// Preference mass on DONE_CORRECT.
  double preference_strength = 0.95;
  /// Preference mass on DONE_WRONG. Whatever is left after strength and
  /// wrong_mass is spread evenly over the live states; that residual is what
  /// makes each extra question cost something.
  double wrong_mass = 1e-12;
  std::size_t max_steps = 64;
};

inline void validate(const Config& cfg) {
  if (cfg.N < 2) throw Error(ErrorCode::kInvalidConfig, "N must be at least 2");
  if (cfg.epsilon_grid.empty()) throw Error(ErrorCode::kGridEmpty, "epsilon grid is empty");
  for (std::size_t i = 0; i < cfg.epsilon_grid.size(); ++i) {
    const double e = cfg.epsilon_grid[i];
    if (!(e >= 0.0 && e < 0.5)) throw Error(ErrorCode::kInvalidConfig, "epsilon grid values must lie in [0, 0.5)");
    if (i > 0 && !(cfg.epsilon_grid[i - 1] < e)) {
      throw Error(ErrorCode::kInvalidConfig, "epsilon grid must be sorted ascending without duplicates");
    }
  }
  if (!(cfg.epsilon_true >= 0.0 && cfg.epsilon_true < 0.5)) {
    throw Error(ErrorCode::kInvalidConfig, "epsilon_true must lie in [0, 0.5)");
  }
  if (!(cfg.preference_strength > 0.0 && cfg.wrong_mass > 0.0 && cfg.preference_strength + cfg.wrong_mass < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < preference_strength, 0 < wrong_mass, and their sum < 1");
  }
}

struct Layout {
  std::size_t N = 0;
  std::size_t G = 0;

  explicit Layout(const Config& cfg) : N(cfg.N), G(cfg.epsilon_grid.size()) {}

  std::size_t num_live() const noexcept { return N * G; }
  std::size_t num_states() const noexcept { return N * G + 2; }
  std::size_t num_actions() const noexcept { return 2 * N - 1; }
  std::size_t live(std::size_t n, std::size_t e) const noexcept { return n * G + e; }
  std::size_t done_correct() const noexcept { return N * G; }
  std::size_t done_wrong() const noexcept { return N * G + 1; }
  std::size_t ask(std::size_t cutpoint) const noexcept { return cutpoint - 1; }
  std::size_t commit(std::size_t n) const noexcept { return N - 1 + n; }
  bool is_ask(std::size_t action) const noexcept { return action < N - 1; }
  std::size_t cutpoint_of(std::size_t action) const noexcept { return action + 1; }
  std::size_t target_of(std::size_t action) const noexcept { return action - (N - 1); }
};

/// P(above | target n, cutpoint c, epsilon).
inline double p_above(std::size_t n, std::size_t c, double eps) { return n >= c ? 1.0 - eps : eps; }

inline GenerativeModel build_model(const Config& cfg) {
  validate(cfg);
  const Layout L(cfg);
  const std::size_t S = L.num_states();
  GenerativeModel m;
  m.num_states = S;
  m.num_actions = L.num_actions();
  m.num_obs = 3;

  std::vector<Matrix> a_tables;
  std::vector<Matrix> b_tables;
  for (std::size_t c = 1; c < cfg.N; ++c) {
    Matrix a(3, S);
    for (std::size_t n = 0; n < cfg.N; ++n) {
      for (std::size_t e = 0; e < L.G; ++e) {
        const double up = p_above(n, c, cfg.epsilon_grid[e]);
        a.at(kAbove, L.live(n, e)) = up;
        a.at(kBelow, L.live(n, e)) = 1.0 - up;
      }
    }
    a.at(kCommitted, L.done_correct()) = 1.0;
    a.at(kCommitted, L.done_wrong()) = 1.0;
    a_tables.push_back(std::move(a));
    b_tables.push_back(Matrix::identity(S));
  }
  for (std::size_t target = 0; target < cfg.N; ++target) {
    Matrix b(S, S);
    for (std::size_t n = 0; n < cfg.N; ++n) {
      for (std::size_t e = 0; e < L.G; ++e) {
        b.at(n == target ? L.done_correct() : L.done_wrong(), L.live(n, e)) = 1.0;
      }
    }
    b.at(L.done_correct(), L.done_correct()) = 1.0;
    b.at(L.done_wrong(), L.done_wrong()) = 1.0;
    b_tables.push_back(std::move(b));
    a_tables.push_back(Matrix::repeat_column({0.0, 0.0, 1.0}, S));
  }
  m.A = ObservationModel::per_action(std::move(a_tables));
  m.B = TransitionModel{std::move(b_tables)};

  std::vector<double> c(S, (1.0 - cfg.preference_strength - cfg.wrong_mass) / static_cast<double>(L.num_live()));
  c[L.done_correct()] = cfg.preference_strength;
  c[L.done_wrong()] = cfg.wrong_mass;
  m.C = PreferenceSchedule::stationary(PreferenceMode::kStates, Dist::normalize(c));

  std::vector<double> d(S, 1.0 / static_cast<double>(L.num_live()));
  d[L.done_correct()] = 0.0;
  d[L.done_wrong()] = 0.0;
  m.D = Dist::normalize(d);
  require_valid(m);
  return m;
}

/// Planning defaults for this scenario: information gain plus state
/// preferences, horizon 2, greedy selection. At precision 1 the commit
/// actions are too close in EFE to the asks and the agent dithers.
inline PlanConfig default_plan() {
  PlanConfig p;
  p.horizon = 2;
  p.precision = std::numeric_limits<double>::infinity();
  p.policy_budget = 10000;
  p.form = EfeForm::kInfoGainStatePreference;
  return p;
}

/// The simulated user's answer: truthful, then flipped with probability
/// epsilon_true. Always consumes exactly one uniform draw.
inline std::size_t respond(const Config& cfg, std::size_t target, std::size_t cutpoint, Rng& rng) {
  const bool truthful_above = target >= cutpoint;
  const bool flip = rng.bernoulli(cfg.epsilon_true);
  return (truthful_above != flip) ? kAbove : kBelow;
}

/// Marginal over targets n, summing out epsilon; DONE states are dropped.
inline std::vector<double> target_marginal(const Dist& belief, const Config& cfg) {
  const Layout L(cfg);
  std::vector<double> out(cfg.N, 0.0);
  for (std::size_t n = 0; n < cfg.N; ++n)
    for (std::size_t e = 0; e < L.G; ++e) out[n] += belief[L.live(n, e)];
  return out;
}

/// Lowest max-posterior target probability at which committing can beat
/// asking under the one-step score: ln(l / w) / ln(s / w), with l the
/// preference mass of one live state, w the DONE_WRONG mass and s the
/// DONE_CORRECT mass. Asking always earns non-negative information gain, so
/// a greedy horizon-1 agent never commits below this value.
inline double commit_threshold(const Config& cfg) {
  const Layout L(cfg);
  const double live = (1.0 - cfg.preference_strength - cfg.wrong_mass) / static_cast<double>(L.num_live());
  return std::log(live / cfg.wrong_mass) / std::log(cfg.preference_strength / cfg.wrong_mass);
}

struct CutpointChoice {
  std::size_t cutpoint = 1;
  double gain = 0.0;
};

/// Brute-force scan over every cutpoint for the expected information gain
/// about the target under a known flip probability. Ties go to the lowest
/// cutpoint.
inline CutpointChoice oracle_optimal_cutpoint(const Dist& targets, double eps) {
  const std::size_t N = targets.size();
  CutpointChoice best{1, -1.0};
  for (std::size_t c = 1; c < N; ++c) {
    double gain = 0.0;
    for (int answer = 0; answer < 2; ++answer) {
      std::vector<double> joint(N);
      double p_answer = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double up = p_above(n, c, eps);
        joint[n] = (answer == 1 ? up : 1.0 - up) * targets[n];
        p_answer += joint[n];
      }
      if (!(p_answer > 0.0)) continue;
      double div = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double post = joint[n] / p_answer;
        if (post > 0.0) div += post * std::log(post / targets[n]);
      }
      gain += p_answer * div;
    }
    if (gain > best.gain) best = {c, gain};
  }
  best.gain = std::max(best.gain, 0.0);
  return best;
}

struct Outcome {
  std::size_t target = 0;
  std::optional<std::size_t> committed;
  bool correct = false;
  std::size_t queries = 0;
  double cum_surprise = 0.0;
  double ms = 0.0;
  EpisodeTrace trace;
};

/// One episode against the simulated user. `target` empty draws it
/// uniformly from `env_rng`; `env_rng` then drives the channel.
inline Outcome run_entry_episode(const Config& cfg, const AgentConfig& agent_cfg, std::optional<std::size_t> target,
                                 Rng& env_rng) {
  const auto start = std::chrono::steady_clock::now();
  Agent agent(build_model(cfg), agent_cfg);
  const Layout L(cfg);
  Outcome out;
  out.target = target ? *target : static_cast<std::size_t>(env_rng.below(cfg.N));
  if (out.target >= cfg.N) throw Error(ErrorCode::kInvalidConfig, "target out of range");
  Environment env = [&](std::size_t action) -> EnvResponse {
    if (L.is_ask(action)) {
      ++out.queries;
      return {respond(cfg, out.target, L.cutpoint_of(action), env_rng), false};
    }
    out.committed = L.target_of(action);
    return {kCommitted, true};
  };
  out.trace = run_episode(agent, env, std::nullopt, cfg.max_steps);
  out.correct = out.committed && *out.committed == out.target;
  out.cum_surprise = out.trace.cumulative_surprise();
  out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Binary-search-then-commit baseline. With a budget of k queries over the
// L = ceil(log2 N) halving levels, each level is asked k / L times (the first
// k % L levels once more) and decided by majority vote, ties resolved to
// "above". A level with no queries guesses "below".

inline std::size_t bisection_levels(std::size_t N) {
  std::size_t levels = 0;
  while ((std::size_t{1} << levels) < N) ++levels;
  return levels;
}

inline std::vector<std::size_t> repetitions_per_level(std::size_t N, std::size_t queries) {
  const std::size_t L = bisection_levels(N);
  std::vector<std::size_t> reps(L, queries / L);
  for (std::size_t i = 0; i < queries % L; ++i) ++reps[i];
  return reps;
}

inline std::size_t binary_search_commit(const Config& cfg, std::size_t target, std::size_t queries, Rng& rng) {
  std::size_t lo = 0, hi = cfg.N;  // candidates [lo, hi)
  for (std::size_t reps : repetitions_per_level(cfg.N, queries)) {
    if (hi - lo < 2) break;
    const std::size_t c = lo + (hi - lo + 1) / 2;
    std::size_t ups = 0;
    for (std::size_t r = 0; r < reps; ++r) ups += respond(cfg, target, c, rng) == kAbove ? 1 : 0;
    const bool above = reps > 0 && 2 * ups >= reps;
    if (above) lo = c; else hi = c;
  }
  return lo;
}

/// Exact accuracy of binary_search_commit for a uniform target when N is a
/// power of two (each level's true direction is then a fair coin).
inline double binary_search_expected_accuracy(std::size_t N, double eps, std::size_t queries) {
  double acc = 1.0;
  for (std::size_t r : repetitions_per_level(N, queries)) {
    if (r == 0) {
      acc *= 0.5;
      continue;
    }
    double p_major = 0.0, p_tie = 0.0;
    for (std::size_t j = 0; j <= r; ++j) {  // j correct answers out of r
      const double p = std::exp(std::lgamma(r + 1.0) - std::lgamma(j + 1.0) - std::lgamma(r - j + 1.0)) *
                       std::pow(1.0 - eps, static_cast<double>(j)) * std::pow(eps, static_cast<double>(r - j));
      if (2 * j > r) p_major += p;
      else if (2 * j == r) p_tie += p;
    }
    acc *= p_major + 0.5 * p_tie;
  }
  return acc;
}

}  // namespace aif::number_entry

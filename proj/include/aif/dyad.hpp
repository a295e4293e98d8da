#pragma once

// Two agents sharing a position z on a ring of M cells. The user knows a
// goal g and walks toward it; the system sees z and the user's moves, infers
// g, and moves z too. Each round the user moves first, then the system.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
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

namespace aif::dyad {

inline constexpr std::size_t kLeft = 0;
inline constexpr std::size_t kRight = 1;
inline constexpr std::size_t kStay = 2;
inline constexpr std::size_t kNumMoves = 3;

inline int move_delta(std::size_t action) {
  switch (action) {
    case kLeft: return -1;
    case kRight: return 1;
    default: return 0;
  }
}

inline std::size_t ring_add(std::size_t z, int delta, std::size_t M) {
  const auto m = static_cast<long long>(M);
  return static_cast<std::size_t>(((static_cast<long long>(z) + delta) % m + m) % m);
}

inline std::size_t ring_distance(std::size_t a, std::size_t b, std::size_t M) {
  const std::size_t d = a > b ? a - b : b - a;
  return std::min(d, M - d);
}

enum class SystemKind { kActiveInference, kRandom, kStay };

inline std::string_view to_string(SystemKind k) {
  switch (k) {
    case SystemKind::kActiveInference: return "aif";
    case SystemKind::kRandom: return "random";
    case SystemKind::kStay: return "stay";
  }
  return "?";
}

struct Config {
  std::size_t M = 9;
  /// Empty draws the goal uniformly from the environment generator.
  std::optional<std::size_t> goal;
  std::size_t start = 0;
  /// Rounds; each round is one user turn followed by one system turn.
  std::size_t max_steps = 40;
  /// Preferences fall off as exp(-sharpness * ring distance to the goal).
  double goal_sharpness = 2.0;
  /// Non-zero makes the system prefer g + offset instead of g.
  int system_goal_offset = 0;
  SystemKind system = SystemKind::kActiveInference;
  /// Precision the system assumes for the user's moves. Must be finite so
  /// every move keeps non-zero likelihood.
  double user_model_precision = 3.0;
  AgentConfig user;
  AgentConfig system_agent;

  Config() {
    user.plan.precision = std::numeric_limits<double>::infinity();
    system_agent.plan.precision = std::numeric_limits<double>::infinity();
  }

  bool aligned() const noexcept { return system_goal_offset % static_cast<long long>(M) == 0; }
};

inline void validate(const Config& cfg) {
  if (cfg.M < 3) throw Error(ErrorCode::kInvalidConfig, "ring size M must be at least 3");
  if (cfg.goal && *cfg.goal >= cfg.M) throw Error(ErrorCode::kInvalidConfig, "goal outside the ring");
  if (cfg.start >= cfg.M) throw Error(ErrorCode::kInvalidConfig, "start outside the ring");
  if (!(cfg.goal_sharpness > 0.0) || !std::isfinite(cfg.goal_sharpness)) {
    throw Error(ErrorCode::kInvalidConfig, "goal_sharpness must be positive and finite");
  }
  if (!(cfg.user_model_precision > 0.0) || !std::isfinite(cfg.user_model_precision)) {
    throw Error(ErrorCode::kInvalidConfig, "user_model_precision must be positive and finite");
  }
}

inline Dist goal_preference(std::size_t M, std::size_t goal, double sharpness) {
  std::vector<double> w(M);
  for (std::size_t z = 0; z < M; ++z) w[z] = std::exp(-sharpness * static_cast<double>(ring_distance(z, goal, M)));
  return Dist::normalize(w);
}

/// Level-1 user: fully observes z, moves left/right/stay, and treats the
/// system's move as a uniform -1/0/+1 disturbance.
inline GenerativeModel build_user_model(const Config& cfg, std::size_t goal) {
  const std::size_t M = cfg.M;
  GenerativeModel m;
  m.num_states = m.num_obs = M;
  m.num_actions = kNumMoves;
  m.A = ObservationModel::shared(Matrix::identity(M));
  for (std::size_t a = 0; a < kNumMoves; ++a) {
    Matrix b(M, M);
    for (std::size_t z = 0; z < M; ++z) {
      const std::size_t moved = ring_add(z, move_delta(a), M);
      for (int d = -1; d <= 1; ++d) b.at(ring_add(moved, d, M), z) += 1.0 / 3.0;
    }
    m.B.per_action.push_back(std::move(b));
  }
  m.C = PreferenceSchedule::stationary(PreferenceMode::kStates, goal_preference(M, goal, cfg.goal_sharpness));
  m.D = Dist::uniform(M);
  return m;
}

/// P(user move | z, g): the first-action marginal of the level-1 user's
/// policy distribution at user_model_precision. Indexed [g][z].
inline std::vector<std::vector<Dist>> user_move_likelihood(const Config& cfg) {
  std::vector<std::vector<Dist>> out(cfg.M);
  PlanConfig plan = cfg.user.plan;
  plan.precision = cfg.user_model_precision;
  for (std::size_t g = 0; g < cfg.M; ++g) {
    const auto um = build_user_model(cfg, g);
    for (std::size_t z = 0; z < cfg.M; ++z) {
      const auto set = score_policies(Belief{Dist::delta(cfg.M, z), 1}, um, plan, 1);
      out[g].push_back(first_action_marginal(set, kNumMoves));
    }
  }
  return out;
}

/// System state (z, g, m): z is the position at the start of a round, g the
/// user's goal and m the user's move that round.
struct SystemLayout {
  std::size_t M;
  std::size_t state(std::size_t z, std::size_t g, std::size_t move) const noexcept { return (z * M + g) * kNumMoves + move; }
  std::size_t num_states() const noexcept { return M * M * kNumMoves; }
  /// Observation: position after the user's move, and the move itself.
  std::size_t obs(std::size_t z_after_user, std::size_t move) const noexcept { return z_after_user * kNumMoves + move; }
  std::size_t num_obs() const noexcept { return M * kNumMoves; }
};

/// Level-2 system: infers the hidden goal from the user's moves.
inline GenerativeModel build_system_model(const Config& cfg) {
  validate(cfg);
  const std::size_t M = cfg.M;
  const SystemLayout L{M};
  const auto pi = user_move_likelihood(cfg);
  const std::size_t S = L.num_states();

  GenerativeModel m;
  m.num_states = S;
  m.num_actions = kNumMoves;
  m.num_obs = L.num_obs();

  Matrix a(L.num_obs(), S);
  for (std::size_t z = 0; z < M; ++z)
    for (std::size_t g = 0; g < M; ++g)
      for (std::size_t u = 0; u < kNumMoves; ++u) a.at(L.obs(ring_add(z, move_delta(u), M), u), L.state(z, g, u)) = 1.0;
  m.A = ObservationModel::shared(std::move(a));

  for (std::size_t act = 0; act < kNumMoves; ++act) {
    Matrix b(S, S);
    for (std::size_t z = 0; z < M; ++z) {
      for (std::size_t g = 0; g < M; ++g) {
        for (std::size_t u = 0; u < kNumMoves; ++u) {
          const std::size_t next = ring_add(z, move_delta(u) + move_delta(act), M);
          for (std::size_t u2 = 0; u2 < kNumMoves; ++u2) b.at(L.state(next, g, u2), L.state(z, g, u)) = pi[g][next][u2];
        }
      }
    }
    m.B.per_action.push_back(std::move(b));
  }

  std::vector<double> c(S);
  for (std::size_t z = 0; z < M; ++z) {
    for (std::size_t g = 0; g < M; ++g) {
      const std::size_t target = ring_add(g, cfg.system_goal_offset % static_cast<int>(M), M);
      const double w = std::exp(-cfg.goal_sharpness * static_cast<double>(ring_distance(z, target, M)));
      for (std::size_t u = 0; u < kNumMoves; ++u) c[L.state(z, g, u)] = w;
    }
  }
  m.C = PreferenceSchedule::stationary(PreferenceMode::kStates, Dist::normalize(c));

  std::vector<double> d(S, 0.0);
  for (std::size_t g = 0; g < M; ++g)
    for (std::size_t u = 0; u < kNumMoves; ++u) d[L.state(cfg.start, g, u)] = pi[g][cfg.start][u] / static_cast<double>(M);
  m.D = Dist::normalize(d);
  require_valid(m);
  return m;
}

/// The system's belief over the goal, summing out z and the move.
inline std::vector<double> goal_marginal(const Dist& belief, std::size_t M) {
  const SystemLayout L{M};
  std::vector<double> out(M, 0.0);
  for (std::size_t z = 0; z < M; ++z)
    for (std::size_t g = 0; g < M; ++g)
      for (std::size_t u = 0; u < kNumMoves; ++u) out[g] += belief[L.state(z, g, u)];
  return out;
}

enum class Side { kUser, kSystem };

struct Turn {
  std::size_t round = 0;
  Side side = Side::kUser;
  std::size_t action = 0;
  /// Position after this turn's move.
  std::size_t z = 0;
  /// User: posterior over z. System: posterior over the goal. Empty for the
  /// scripted systems.
  std::vector<double> belief;
  double surprise = 0.0;
  /// Entropy of the acting agent's policy distribution.
  double policy_entropy = 0.0;
};

struct Summary {
  std::size_t goal = 0;
  /// Rounds until z first equals the goal, counting the round where it
  /// happens; 0 when it starts there, max_steps + 1 when never reached.
  std::size_t steps_to_goal = 0;
  bool reached = false;
  double frac_goal_q4 = 0.0;
  double surprise_user = 0.0;
  double surprise_system = 0.0;
};

struct Result {
  std::vector<Turn> turns;
  Summary summary;
};

/// Plays one episode. `env_rng` draws the goal when unset and drives the
/// random system.
inline Result run_dyad(const Config& cfg, Rng& env_rng) {
  validate(cfg);
  const std::size_t M = cfg.M;
  Result res;
  const std::size_t goal = cfg.goal ? *cfg.goal : static_cast<std::size_t>(env_rng.below(M));
  res.summary.goal = goal;

  Agent user(build_user_model(cfg, goal), cfg.user);
  std::optional<Agent> system;
  if (cfg.system == SystemKind::kActiveInference) system.emplace(build_system_model(cfg), cfg.system_agent);
  const SystemLayout L{M};

  std::size_t z = cfg.start;
  std::optional<std::size_t> first_hit;
  if (z == goal) first_hit = 0;
  const std::size_t q4_start = cfg.max_steps - cfg.max_steps / 4;
  std::size_t q4_rounds = 0, q4_hits = 0;
  double user_total = 0.0, system_total = 0.0;

  for (std::size_t round = 0; round < cfg.max_steps; ++round) {
    const std::size_t u = user.step(z);
    const auto& ur = user.trace().steps.back();
    z = ring_add(z, move_delta(u), M);
    res.turns.push_back({round, Side::kUser, u, z, ur.posterior.dist.vector(), ur.surprise, ur.policy_entropy});
    user_total += ur.surprise;
    if (!first_hit && z == goal) first_hit = round + 1;

    Turn st{round, Side::kSystem, kStay, z, {}, 0.0, 0.0};
    switch (cfg.system) {
      case SystemKind::kActiveInference: {
        st.action = system->step(L.obs(z, u));
        const auto& sr = system->trace().steps.back();
        st.belief = goal_marginal(sr.posterior.dist, M);
        st.surprise = sr.surprise;
        st.policy_entropy = sr.policy_entropy;
        break;
      }
      case SystemKind::kRandom:
        st.action = static_cast<std::size_t>(env_rng.below(kNumMoves));
        break;
      case SystemKind::kStay:
        break;
    }
    z = ring_add(z, move_delta(st.action), M);
    st.z = z;
    system_total += st.surprise;
    res.turns.push_back(std::move(st));
    if (!first_hit && z == goal) first_hit = round + 1;

    if (round >= q4_start) {
      ++q4_rounds;
      q4_hits += z == goal ? 1 : 0;
    }
  }

  auto& s = res.summary;
  s.reached = first_hit.has_value();
  s.steps_to_goal = first_hit ? *first_hit : cfg.max_steps + 1;
  s.frac_goal_q4 = q4_rounds ? static_cast<double>(q4_hits) / static_cast<double>(q4_rounds) : 0.0;
  const double rounds = static_cast<double>(std::max<std::size_t>(cfg.max_steps, 1));
  s.surprise_user = user_total / rounds;
  s.surprise_system = system_total / rounds;
  return res;
}

/// Mean user surprise over the first and last quarter of rounds.
inline std::pair<double, double> user_surprise_quarters(const Result& r) {
  std::vector<double> user;
  for (const auto& t : r.turns)
    if (t.side == Side::kUser) user.push_back(t.surprise);
  const std::size_t q = std::max<std::size_t>(user.size() / 4, 1);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < q && i < user.size(); ++i) {
    first += user[i];
    last += user[user.size() - 1 - i];
  }
  return {first / static_cast<double>(q), last / static_cast<double>(q)};
}

}  // namespace aif::dyad

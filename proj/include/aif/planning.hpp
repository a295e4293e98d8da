#pragma once

// Policy enumeration, hypothetical rollouts, expected free energy scoring and
// the softmax policy distribution.
//
// Three EFE forms share the same rollout. With q_k the hypothetical belief
// after k+1 actions (no corrections) and A_k the observation table in force
// after action policy[k], each step contributes:
//
//   kObservation             -IG(q_k, A_k) - Σ_o P(o) ln C(o)
//   kRiskAmbiguity           KL(q_k || C(s)) + Σ_s q_k[s] H[P(o | s)]
//   kInfoGainStatePreference -IG(q_k, A_k) - Σ_s q_k[s] ln C(s)
//
// and the policy score is the mean over the T steps.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aif/error.hpp"
#include "aif/genmodel.hpp"
#include "aif/inference.hpp"
#include "aif/probmath.hpp"
#include "aif/rng.hpp"

namespace aif {

struct Policy {
  std::vector<std::size_t> actions;

  std::size_t horizon() const noexcept { return actions.size(); }
  friend bool operator==(const Policy&, const Policy&) = default;
};

enum class EfeForm { kObservation, kRiskAmbiguity, kInfoGainStatePreference };

inline std::string_view to_string(EfeForm f) {
  switch (f) {
    case EfeForm::kObservation: return "observation";
    case EfeForm::kRiskAmbiguity: return "risk_ambiguity";
    case EfeForm::kInfoGainStatePreference: return "info_gain_state";
  }
  return "unknown";
}

/// Form implied by the preference mode when none is configured.
inline EfeForm default_form(PreferenceMode mode) {
  return mode == PreferenceMode::kObservations ? EfeForm::kObservation : EfeForm::kRiskAmbiguity;
}

/// Per-step terms of one policy. Only the vectors belonging to `form` are
/// filled; `efe` is their mean total.
struct EfeBreakdown {
  EfeForm form = EfeForm::kObservation;
  std::vector<double> info_gain;
  std::vector<double> pragmatic;
  std::vector<double> risk;
  std::vector<double> ambiguity;
  double efe = 0.0;

  friend bool operator==(const EfeBreakdown&, const EfeBreakdown&) = default;
};

struct PolicySet {
  std::vector<Policy> policies;
  std::vector<double> efes;
  std::vector<EfeBreakdown> breakdowns;
  Dist dist = Dist::uniform(1);
};

/// Every action sequence of length `horizon` in lexicographic order.
/// Throws kBudgetExceeded when num_actions^horizon > budget.
inline std::vector<Policy> enumerate_policies(std::size_t num_actions, std::size_t horizon, std::size_t budget) {
  if (horizon == 0) throw Error(ErrorCode::kInvalidConfig, "horizon must be at least 1");
  if (num_actions == 0) throw Error(ErrorCode::kInvalidConfig, "no actions to enumerate");
  std::size_t count = 1;
  for (std::size_t k = 0; k < horizon; ++k) {
    if (count > budget / num_actions) {
      throw Error(ErrorCode::kBudgetExceeded, std::to_string(num_actions) + "^" + std::to_string(horizon) +
                                                  " policies exceed the budget of " + std::to_string(budget));
    }
    count *= num_actions;
  }
  std::vector<Policy> out;
  out.reserve(count);
  std::vector<std::size_t> digits(horizon, 0);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({digits});
    for (std::size_t k = horizon; k-- > 0;) {
      if (++digits[k] < num_actions) break;
      digits[k] = 0;
    }
  }
  return out;
}

/// Hypothetical beliefs q_1..q_T: chained predictions, corrections skipped.
inline std::vector<Belief> rollout_beliefs(const Belief& q, const Policy& policy, const GenerativeModel& m) {
  std::vector<Belief> out;
  out.reserve(policy.horizon());
  Belief cur = q;
  for (auto a : policy.actions) {
    cur = predict(cur, a, m.B);
    out.push_back(cur);
  }
  return out;
}

/// E_{P(o)}[KL(Q(s|o) || Q(s))], summed exactly over observations.
/// Observations with P(o) = 0 contribute nothing.
inline double expected_information_gain(std::span<const double> q, const Matrix& a_table) {
  detail::require_same_length(a_table.cols(), q.size(), "expected_information_gain");
  const auto p_obs = predictive_observations(q, a_table);
  std::vector<double> post(q.size());
  double gain = 0.0;
  for (std::size_t o = 0; o < p_obs.size(); ++o) {
    if (!(p_obs[o] > 0.0)) continue;
    double evidence = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) {
      post[s] = a_table.at(o, s) * q[s];
      evidence += post[s];
    }
    if (!(evidence > 0.0)) continue;
    for (auto& x : post) x /= evidence;
    gain += p_obs[o] * kl(post, q);
  }
  return gain;
}
inline double expected_information_gain(const Belief& q, const Matrix& a_table) {
  return expected_information_gain(q.dist.values(), a_table);
}

/// E_{P(o)}[ln C(o)] with C floored.
inline double pragmatic_value_obs(std::span<const double> q, const Matrix& a_table, const Dist& c) {
  const auto p_obs = predictive_observations(q, a_table);
  return expected_log(p_obs, c.values());
}
inline double pragmatic_value_obs(const Belief& q, const Matrix& a_table, const Dist& c) {
  return pragmatic_value_obs(q.dist.values(), a_table, c);
}

/// Σ_s q[s] H[P(o | s)].
inline double ambiguity(std::span<const double> q, const Matrix& a_table) {
  detail::require_same_length(a_table.cols(), q.size(), "ambiguity");
  double v = 0.0;
  for (std::size_t s = 0; s < q.size(); ++s) {
    if (q[s] == 0.0) continue;
    double h = 0.0;
    for (std::size_t o = 0; o < a_table.rows(); ++o) {
      const double p = a_table.at(o, s);
      if (p > 0.0) h -= p * std::log(p);
    }
    v += q[s] * h;
  }
  return v;
}

namespace detail {

inline void require_mode(const GenerativeModel& m, EfeForm form) {
  const bool want_obs = form == EfeForm::kObservation;
  const bool have_obs = m.C.mode == PreferenceMode::kObservations;
  if (want_obs != have_obs) {
    throw Error(ErrorCode::kModeMismatch, std::string(to_string(form)) + " form needs preferences over " +
                                              (want_obs ? "observations" : "states"));
  }
}

// One step's contribution, appended to `out`; returns the signed term that
// enters the EFE sum.
inline double step_terms(EfeForm form, const Belief& qk, const Matrix& a_table, const Dist& pref, EfeBreakdown& out) {
  switch (form) {
    case EfeForm::kObservation: {
      const double ig = expected_information_gain(qk, a_table);
      const double pv = pragmatic_value_obs(qk, a_table, pref);
      out.info_gain.push_back(ig);
      out.pragmatic.push_back(pv);
      return -ig - pv;
    }
    case EfeForm::kRiskAmbiguity: {
      const double r = kl(qk.dist, pref);
      const double amb = ambiguity(qk.dist.values(), a_table);
      out.risk.push_back(r);
      out.ambiguity.push_back(amb);
      return r + amb;
    }
    case EfeForm::kInfoGainStatePreference: {
      const double ig = expected_information_gain(qk, a_table);
      const double pv = expected_log(qk.dist, pref);
      out.info_gain.push_back(ig);
      out.pragmatic.push_back(pv);
      return -ig - pv;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Scores one policy under `form`. Preferences are looked up at absolute
/// timesteps t0, t0+1, ... for the T hypothetical steps.
inline EfeBreakdown evaluate_policy(const Belief& q, const Policy& policy, const GenerativeModel& m, std::size_t t0,
                                    EfeForm form) {
  detail::require_mode(m, form);
  if (policy.actions.empty()) throw Error(ErrorCode::kInvalidConfig, "empty policy");
  EfeBreakdown out;
  out.form = form;
  double total = 0.0;
  const auto beliefs = rollout_beliefs(q, policy, m);
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    total += detail::step_terms(form, beliefs[k], m.A.table(policy.actions[k]), preference_at(m.C, t0 + k), out);
  }
  out.efe = total / static_cast<double>(policy.horizon());
  return out;
}

inline EfeBreakdown efe_observation_form(const Belief& q, const Policy& policy, const GenerativeModel& m,
                                         std::size_t t0) {
  return evaluate_policy(q, policy, m, t0, EfeForm::kObservation);
}

inline EfeBreakdown efe_state_form(const Belief& q, const Policy& policy, const GenerativeModel& m, std::size_t t0) {
  return evaluate_policy(q, policy, m, t0, EfeForm::kRiskAmbiguity);
}

inline EfeBreakdown efe_info_gain_state_form(const Belief& q, const Policy& policy, const GenerativeModel& m,
                                             std::size_t t0) {
  return evaluate_policy(q, policy, m, t0, EfeForm::kInfoGainStatePreference);
}

inline Dist policy_distribution(std::span<const double> efes, double precision = 1.0) {
  return softmax_neg(efes, precision);
}

struct PlanConfig {
  std::size_t horizon = 1;
  /// Softmax precision; +infinity selects the lowest-index EFE minimum.
  double precision = 1.0;
  std::size_t policy_budget = 10000;
  /// Defaults to the form implied by the model's preference mode.
  std::optional<EfeForm> form;
};

inline EfeForm resolve_form(const PlanConfig& cfg, const GenerativeModel& m) {
  return cfg.form.value_or(default_form(m.C.mode));
}

/// Scores every policy of length cfg.horizon. Shared prefixes are rolled out
/// once; the numbers are identical to calling evaluate_policy per policy.
inline PolicySet score_policies(const Belief& q, const GenerativeModel& m, const PlanConfig& cfg, std::size_t t0) {
  const EfeForm form = resolve_form(cfg, m);
  detail::require_mode(m, form);
  PolicySet set;
  set.policies = enumerate_policies(m.num_actions, cfg.horizon, cfg.policy_budget);
  set.efes.reserve(set.policies.size());
  set.breakdowns.reserve(set.policies.size());

  const std::size_t T = cfg.horizon;
  // Depth-first over the lexicographic tree; level k holds the belief and
  // step terms after actions[0..k].
  std::vector<Belief> beliefs(T, q);
  std::vector<EfeBreakdown> level_terms(T);
  std::vector<double> level_term(T, 0.0);
  std::vector<std::size_t> digits(T, 0);
  auto expand = [&](std::size_t k) {
    const Belief& parent = k == 0 ? q : beliefs[k - 1];
    beliefs[k] = predict(parent, digits[k], m.B);
    level_terms[k] = EfeBreakdown{};
    level_term[k] = detail::step_terms(form, beliefs[k], m.A.table(digits[k]), preference_at(m.C, t0 + k),
                                       level_terms[k]);
  };
  for (std::size_t k = 0; k < T; ++k) expand(k);
  for (std::size_t i = 0; i < set.policies.size(); ++i) {
    EfeBreakdown b;
    b.form = form;
    double total = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      total += level_term[k];
      const auto& lt = level_terms[k];
      b.info_gain.insert(b.info_gain.end(), lt.info_gain.begin(), lt.info_gain.end());
      b.pragmatic.insert(b.pragmatic.end(), lt.pragmatic.begin(), lt.pragmatic.end());
      b.risk.insert(b.risk.end(), lt.risk.begin(), lt.risk.end());
      b.ambiguity.insert(b.ambiguity.end(), lt.ambiguity.begin(), lt.ambiguity.end());
    }
    b.efe = total / static_cast<double>(T);
    set.efes.push_back(b.efe);
    set.breakdowns.push_back(std::move(b));

    if (i + 1 == set.policies.size()) break;
    std::size_t k = T;
    while (k-- > 0) {
      if (++digits[k] < m.num_actions) break;
      digits[k] = 0;
    }
    for (std::size_t j = k; j < T; ++j) expand(j);
  }
  set.dist = policy_distribution(set.efes, cfg.precision);
  return set;
}

struct ActionChoice {
  std::size_t action = 0;
  std::size_t policy_index = 0;
  PolicySet scored;
};

/// Scores all policies, samples one from the softmax and returns its first
/// action together with the full scored set.
inline ActionChoice select_action(const Belief& q, const GenerativeModel& m, const PlanConfig& cfg, Rng& rng,
                                  std::size_t t0) {
  ActionChoice c;
  c.scored = score_policies(q, m, cfg, t0);
  c.policy_index = sample_index(c.scored.dist, rng);
  c.action = c.scored.policies[c.policy_index].actions.front();
  return c;
}

/// Marginal probability of each first action under the policy distribution.
inline Dist first_action_marginal(const PolicySet& set, std::size_t num_actions) {
  std::vector<double> w(num_actions, 0.0);
  for (std::size_t i = 0; i < set.policies.size(); ++i) w[set.policies[i].actions.front()] += set.dist[i];
  return Dist::normalize(w);
}

struct ActionSummary {
  std::size_t action = 0;
  double efe = 0.0;
  double info_gain = 0.0;
  double pragmatic = 0.0;
};

/// For each first action, the best policy that starts with it: its EFE and
/// the mean info-gain / pragmatic terms (risk / ambiguity in that form).
inline std::vector<ActionSummary> first_action_summary(const PolicySet& set, std::size_t num_actions) {
  std::vector<ActionSummary> out(num_actions);
  std::vector<bool> seen(num_actions, false);
  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return v.empty() ? 0.0 : t / static_cast<double>(v.size());
  };
  for (std::size_t i = 0; i < set.policies.size(); ++i) {
    const auto a = set.policies[i].actions.front();
    if (seen[a] && !(set.efes[i] < out[a].efe)) continue;
    seen[a] = true;
    const auto& b = set.breakdowns[i];
    const bool risk_form = b.form == EfeForm::kRiskAmbiguity;
    out[a] = {a, set.efes[i], mean(risk_form ? b.risk : b.info_gain), mean(risk_form ? b.ambiguity : b.pragmatic)};
  }
  return out;
}

}  // namespace aif

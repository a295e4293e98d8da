#pragma once

// Test-only helpers: random model generation and brute-force oracles that
// share no code path with the library's filtering and planning routines.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "aif/genmodel.hpp"
#include "aif/probmath.hpp"
#include "aif/rng.hpp"

namespace aif::oracle {

// Dirichlet(1) draw via normalized exponentials; entries strictly positive.
inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double t = 0.0;
  for (auto& x : w) {
    x = -std::log(1.0 - rng.uniform());
    t += x;
  }
  for (auto& x : w) x /= t;
  return w;
}

inline Matrix random_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto col = random_simplex(rows, rng);
    for (std::size_t r = 0; r < rows; ++r) m.at(r, c) = col[r];
  }
  return m;
}

inline GenerativeModel random_model(std::size_t S, std::size_t Na, std::size_t O, Rng& rng,
                                    PreferenceMode mode = PreferenceMode::kObservations) {
  GenerativeModel m;
  m.num_states = S;
  m.num_actions = Na;
  m.num_obs = O;
  m.A = ObservationModel::shared(random_stochastic(O, S, rng));
  for (std::size_t a = 0; a < Na; ++a) m.B.per_action.push_back(random_stochastic(S, S, rng));
  m.C = PreferenceSchedule::stationary(mode, Dist::normalize(random_simplex(mode == PreferenceMode::kObservations ? O : S, rng)));
  m.D = Dist::normalize(random_simplex(S, rng));
  return m;
}

/// Calls f on every sequence in {0..base-1}^length.
inline void for_each_sequence(std::size_t base, std::size_t length,
                              const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> seq(length, 0);
  while (true) {
    f(seq);
    std::size_t k = length;
    while (k > 0) {
      --k;
      if (++seq[k] < base) break;
      seq[k] = 0;
      if (k == 0) return;
    }
    if (length == 0) return;
  }
}

/// P(s_k | o_0..o_k, a_0..a_{k-1}) by summing the joint over every state path.
inline std::vector<double> joint_enumeration_posterior(const GenerativeModel& m, const std::vector<std::size_t>& actions,
                                                       const std::vector<std::size_t>& obs) {
  const std::size_t S = m.num_states;
  const Matrix& A = m.A.tables.at(0);
  std::vector<double> post(S, 0.0);
  for_each_sequence(S, actions.size() + 1, [&](const std::vector<std::size_t>& path) {
    double w = m.D[path[0]] * A.at(obs[0], path[0]);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      w *= m.B[actions[i]].at(path[i + 1], path[i]) * A.at(obs[i + 1], path[i + 1]);
    }
    post[path.back()] += w;
  });
  double z = 0.0;
  for (double x : post) z += x;
  for (auto& x : post) x /= z;
  return post;
}

/// Marginal state distribution after applying `actions` from q, by path
/// enumeration.
inline std::vector<double> path_marginal(const GenerativeModel& m, const std::vector<double>& q,
                                         const std::vector<std::size_t>& actions) {
  const std::size_t S = m.num_states;
  std::vector<double> out(S, 0.0);
  for_each_sequence(S, actions.size() + 1, [&](const std::vector<std::size_t>& path) {
    double w = q[path[0]];
    for (std::size_t i = 0; i < actions.size(); ++i) w *= m.B[actions[i]].at(path[i + 1], path[i]);
    out[path.back()] += w;
  });
  return out;
}

inline double floored_log(double p, const std::vector<double>& all) {
  double z = 0.0;
  for (double x : all) z += std::max(x, 1e-12);
  return std::log(std::max(p, 1e-12) / z);
}

struct OracleTerms {
  double info_gain = 0.0;
  double pragmatic = 0.0;
};

/// Information gain and observation-pragmatic value for a hypothetical belief,
/// enumerating observation branches explicitly.
inline OracleTerms observation_branch_terms(const std::vector<double>& q, const Matrix& A, const std::vector<double>& c) {
  OracleTerms t;
  for (std::size_t o = 0; o < A.rows(); ++o) {
    double p_o = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) p_o += A.at(o, s) * q[s];
    if (p_o <= 0.0) continue;
    double div = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) {
      const double post = A.at(o, s) * q[s] / p_o;
      if (post > 0.0) div += post * (std::log(post) - floored_log(q[s], q));
    }
    t.info_gain += p_o * div;
    t.pragmatic += p_o * floored_log(c[o], c);
  }
  return t;
}

/// Expected free energy, observation form, from first principles.
inline double brute_force_efe_obs(const GenerativeModel& m, const std::vector<double>& q0,
                                  const std::vector<std::size_t>& policy, std::size_t t0) {
  double total = 0.0;
  for (std::size_t k = 0; k < policy.size(); ++k) {
    const std::vector<std::size_t> prefix(policy.begin(), policy.begin() + static_cast<long>(k) + 1);
    const auto qk = path_marginal(m, q0, prefix);
    const auto& c = m.C.entries[std::min(t0 + k, m.C.entries.size() - 1)].vector();
    const auto t = observation_branch_terms(qk, m.A.table(policy[k]), c);
    total += -t.info_gain - t.pragmatic;
  }
  return total / static_cast<double>(policy.size());
}

/// Total expected information gain along a policy, from first principles.
inline double brute_force_total_info_gain(const GenerativeModel& m, const std::vector<double>& q0,
                                          const std::vector<std::size_t>& policy) {
  double total = 0.0;
  const std::vector<double> flat(m.num_obs, 1.0 / static_cast<double>(m.num_obs));
  for (std::size_t k = 0; k < policy.size(); ++k) {
    const std::vector<std::size_t> prefix(policy.begin(), policy.begin() + static_cast<long>(k) + 1);
    total += observation_branch_terms(path_marginal(m, q0, prefix), m.A.table(policy[k]), flat).info_gain;
  }
  return total;
}

}  // namespace aif::oracle

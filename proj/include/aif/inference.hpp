#pragma once

// Exact Bayesian filtering over a finite hidden-state space.
//
// Episode convention: the first observation corrects the prior D, then each
// cycle is act -> predict -> observe -> correct.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aif/error.hpp"
#include "aif/genmodel.hpp"
#include "aif/probmath.hpp"

namespace aif {

struct Belief {
  Dist dist;
  std::size_t timestep = 0;

  friend bool operator==(const Belief&, const Belief&) = default;
};

/// Σ_s P(s' | s, a) q[s]; advances the timestep.
inline Belief predict(const Belief& q, std::size_t action, const TransitionModel& b) {
  if (action >= b.num_actions()) {
    throw Error(ErrorCode::kActionOutOfRange,
                "action " + std::to_string(action) + " of " + std::to_string(b.num_actions()));
  }
  const Matrix& t = b[action];
  const std::size_t n = q.dist.size();
  detail::require_same_length(t.cols(), n, "predict");
  std::vector<double> out(t.rows(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double w = q.dist[s];
    if (w == 0.0) continue;
    for (std::size_t s2 = 0; s2 < t.rows(); ++s2) out[s2] += t.at(s2, s) * w;
  }
  return {Dist::normalize(out), q.timestep + 1};
}

/// Predictive observation distribution P(o) = Σ_s P(o | s) q[s], unnormalized
/// only by rounding.
inline std::vector<double> predictive_observations(std::span<const double> q, const Matrix& a_table) {
  detail::require_same_length(a_table.cols(), q.size(), "predictive_observations");
  std::vector<double> p(a_table.rows(), 0.0);
  for (std::size_t s = 0; s < q.size(); ++s) {
    if (q[s] == 0.0) continue;
    for (std::size_t o = 0; o < a_table.rows(); ++o) p[o] += a_table.at(o, s) * q[s];
  }
  return p;
}

/// Posterior ∝ P(o | s) q[s]. A zero normalising constant means the model
/// cannot produce `o` from this belief and raises kImpossibleObservation.
inline Belief correct(const Belief& q, std::size_t o, const Matrix& a_table) {
  if (o >= a_table.rows()) {
    throw Error(ErrorCode::kObservationOutOfRange,
                "observation " + std::to_string(o) + " of " + std::to_string(a_table.rows()));
  }
  detail::require_same_length(a_table.cols(), q.dist.size(), "correct");
  std::vector<double> joint(q.dist.size());
  double evidence = 0.0;
  for (std::size_t s = 0; s < joint.size(); ++s) {
    joint[s] = a_table.at(o, s) * q.dist[s];
    evidence += joint[s];
  }
  if (!(evidence > 0.0)) {
    throw Error(ErrorCode::kImpossibleObservation,
                "observation " + std::to_string(o) + " has zero probability at timestep " + std::to_string(q.timestep));
  }
  return {Dist::normalize(joint), q.timestep};
}

/// Posterior after correct(o_0) on D, then predict(a_i), correct(o_{i+1}) for
/// each action. Requires observations.size() == actions.size() + 1.
inline Belief filter(const Dist& initial, std::span<const std::size_t> actions,
                     std::span<const std::size_t> observations, const GenerativeModel& m) {
  if (observations.size() != actions.size() + 1) {
    throw Error(ErrorCode::kLengthMismatch, "filter needs one more observation than actions (got " +
                                                std::to_string(observations.size()) + " and " +
                                                std::to_string(actions.size()) + ")");
  }
  Belief q{initial, 0};
  q = correct(q, observations[0], m.A.table(std::nullopt));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    q = predict(q, actions[i], m.B);
    q = correct(q, observations[i + 1], m.A.table(actions[i]));
  }
  return q;
}

}  // namespace aif

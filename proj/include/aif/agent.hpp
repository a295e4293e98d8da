#pragma once

// The closed perception-action loop: observe -> correct -> plan -> act ->
// predict, with a per-step trace.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aif/error.hpp"
#include "aif/genmodel.hpp"
#include "aif/inference.hpp"
#include "aif/planning.hpp"
#include "aif/rng.hpp"

namespace aif {

struct AgentConfig {
  PlanConfig plan;
  std::uint64_t seed = 0;
  /// Keep the full per-policy EFE table in each trace step.
  bool diagnostic = false;
};

struct StepRecord {
  std::size_t t = 0;
  Belief prior;
  std::optional<std::size_t> observation;
  Belief posterior;
  std::size_t action = 0;
  std::size_t policy_index = 0;
  EfeBreakdown chosen;
  /// Entropy of the policy distribution at this step.
  double policy_entropy = 0.0;
  /// -ln P(o) under the prior predictive; 0 when nothing was observed.
  double surprise = 0.0;
  std::vector<double> efe_table;  // diagnostic only
  double ms = 0.0;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  bool max_steps_reached = false;

  double cumulative_surprise() const {
    double s = 0.0;
    for (const auto& r : steps) s += r.surprise;
    return s;
  }
};

class Agent {
 public:
  Agent(GenerativeModel model, AgentConfig cfg)
      : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed), belief_{model_.D, 0} {
    require_valid(model_);
    if (cfg_.plan.horizon == 0) throw Error(ErrorCode::kInvalidConfig, "horizon must be at least 1");
    if (cfg_.plan.policy_budget < model_.num_actions) {
      throw Error(ErrorCode::kInvalidConfig, "policy budget smaller than the action count");
    }
    form_ = resolve_form(cfg_.plan, model_);
    detail::require_mode(model_, form_);
  }

  /// Belief back to D, step counter and trace cleared. The generator keeps
  /// its state unless a new seed is supplied.
  void reset(std::optional<std::uint64_t> seed = std::nullopt) {
    belief_ = Belief{model_.D, 0};
    trace_ = EpisodeTrace{};
    last_action_.reset();
    if (seed) {
      cfg_.seed = *seed;
      rng_.reseed(*seed);
    }
  }

  /// One cycle. `observation` may be empty when the environment has nothing
  /// to report yet (e.g. before the first question is asked).
  std::size_t step(std::optional<std::size_t> observation) {
    const auto start = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.t = trace_.steps.size();
    rec.prior = belief_;
    rec.observation = observation;
    if (observation) {
      const Matrix& table = model_.A.table(last_action_);
      try {
        rec.posterior = correct(belief_, *observation, table);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kImpossibleObservation) throw;
        throw Error(ErrorCode::kImpossibleObservation,
                    "step " + std::to_string(rec.t) + " after " + std::to_string(trace_.steps.size()) +
                        " completed steps (last action " +
                        (last_action_ ? std::to_string(*last_action_) : std::string("none")) + "): " + e.what());
      }
      const auto p_obs = predictive_observations(belief_.dist.values(), table);
      rec.surprise = -std::log(p_obs[*observation]);
    } else {
      rec.posterior = belief_;
    }

    auto choice = select_action(rec.posterior, model_, cfg_.plan, rng_, rec.posterior.timestep + 1);
    rec.action = choice.action;
    rec.policy_index = choice.policy_index;
    rec.chosen = choice.scored.breakdowns[choice.policy_index];
    rec.policy_entropy = entropy(choice.scored.dist);
    if (cfg_.diagnostic) rec.efe_table = choice.scored.efes;
    last_scored_ = std::move(choice.scored);

    belief_ = predict(rec.posterior, rec.action, model_.B);
    last_action_ = rec.action;
    rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    trace_.steps.push_back(std::move(rec));
    return trace_.steps.back().action;
  }

  const GenerativeModel& model() const noexcept { return model_; }
  const AgentConfig& config() const noexcept { return cfg_; }
  const Belief& belief() const noexcept { return belief_; }
  const EpisodeTrace& trace() const noexcept { return trace_; }
  EpisodeTrace& trace() noexcept { return trace_; }
  std::size_t step_count() const noexcept { return trace_.steps.size(); }
  std::optional<std::size_t> last_action() const noexcept { return last_action_; }
  EfeForm form() const noexcept { return form_; }
  /// Scored policy set from the most recent step.
  const PolicySet& last_scored() const noexcept { return last_scored_; }

 private:
  GenerativeModel model_;
  AgentConfig cfg_;
  Rng rng_;
  Belief belief_;
  EfeForm form_ = EfeForm::kObservation;
  EpisodeTrace trace_;
  std::optional<std::size_t> last_action_;
  PolicySet last_scored_;
};

struct EnvResponse {
  std::optional<std::size_t> observation;
  bool done = false;
};

/// Maps the agent's action to the next observation.
using Environment = std::function<EnvResponse(std::size_t action)>;

/// Alternates agent.step and env until the environment reports done or
/// max_steps cycles have run (flagged, not an error).
inline EpisodeTrace run_episode(Agent& agent, const Environment& env, std::optional<std::size_t> first_observation,
                                std::size_t max_steps) {
  std::optional<std::size_t> obs = first_observation;
  bool done = false;
  for (std::size_t i = 0; i < max_steps && !done; ++i) {
    const auto a = agent.step(obs);
    const auto r = env(a);
    done = r.done;
    obs = r.observation;
  }
  EpisodeTrace out = agent.trace();
  out.max_steps_reached = !done;
  agent.trace().max_steps_reached = !done;
  return out;
}

}  // namespace aif

#include <atomic>
#include <chrono>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "aif/session.hpp"
#include "aif/trace_io.hpp"

using namespace aif;
using nlohmann::json;
using session::Phase;
using session::SessionManager;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::vector<std::string> types(const std::vector<json>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) out.push_back(e.at("type"));
  return out;
}

std::optional<std::size_t> last_cutpoint(const std::vector<json>& events) {
  for (auto it = events.rbegin(); it != events.rend(); ++it)
    if ((*it)["type"] == "query") return (*it)["cutpoint"].get<std::size_t>();
  return std::nullopt;
}

double mass(const json& belief) {
  const auto d = belief.at("dist").get<std::vector<double>>();
  return std::accumulate(d.begin(), d.end(), 0.0);
}

// Plays a truthful human until the session ends; returns all events.
std::vector<json> play_truthfully(SessionManager& m, const std::string& id, std::size_t target) {
  while (m.phase(id) == Phase::kQuerying) {
    const auto c = last_cutpoint(m.events(id));
    m.post_response(id, target >= *c);
  }
  return m.events(id);
}

struct FakeClock {
  std::shared_ptr<SessionManager::Clock::time_point> now =
      std::make_shared<SessionManager::Clock::time_point>(SessionManager::Clock::time_point{});
  std::function<SessionManager::Clock::time_point()> fn() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(double seconds) {
    *now += std::chrono::duration_cast<SessionManager::Clock::duration>(std::chrono::duration<double>(seconds));
  }
};

}  // namespace

TEST(Session, DefaultsOpenWithCutpointEight) {
  SessionManager m;
  const auto c = m.create();
  EXPECT_EQ(types(c.events), (std::vector<std::string>{"created", "query"}));
  EXPECT_EQ(c.events[0]["N"], 16);
  EXPECT_EQ(c.events[1]["cutpoint"], 8);
  EXPECT_NEAR(mass(c.events[0]["belief"]), 1.0, 1e-9);
  EXPECT_EQ(c.events[0]["belief"]["dist"].size(), 16u);
  EXPECT_EQ(m.phase(c.id), Phase::kQuerying);
}

TEST(Session, TwoValuesAskTheOnlyCutpoint) {
  SessionManager m;
  EXPECT_EQ(m.create({{"N", 2}}).events.back()["cutpoint"], 1);
}

TEST(Session, IdsAreDistinct) {
  SessionManager m;
  EXPECT_NE(m.create().id, m.create().id);
}

TEST(Session, TruthfulAnswersForElevenBisect) {
  SessionManager m;
  const auto id = m.create().id;
  const auto events = play_truthfully(m, id, 11);
  std::vector<std::size_t> cutpoints;
  for (const auto& e : events) {
    if (e["type"] == "query") cutpoints.push_back(e["cutpoint"]);
    if (e["type"] == "belief") EXPECT_NEAR(mass(e), 1.0, 1e-9);
    if (e["type"] == "efe") EXPECT_FALSE(e["rows"].empty());
  }
  EXPECT_EQ(cutpoints, (std::vector<std::size_t>{8, 12, 10, 11}));
  EXPECT_EQ(m.phase(id), Phase::kCommitted);
  const auto& commit = events[events.size() - 5];
  EXPECT_EQ(commit["type"], "commit");
  EXPECT_EQ(commit["n"], 11);
  EXPECT_EQ(commit["queries"], 4);
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i);
}

TEST(Session, RespondingAfterCommitIsWrongPhase) {
  SessionManager m;
  const auto id = m.create().id;
  play_truthfully(m, id, 3);
  EXPECT_EQ(code_of([&] { m.post_response(id, true); }), ErrorCode::kWrongPhase);
  EXPECT_EQ(code_of([&] { m.abort(id); }), ErrorCode::kWrongPhase);
}

TEST(Session, UnknownIds) {
  SessionManager m;
  EXPECT_EQ(code_of([&] { m.post_response("nope", true); }), ErrorCode::kUnknownSession);
  EXPECT_EQ(code_of([&] { m.events("nope"); }), ErrorCode::kUnknownSession);
  EXPECT_EQ(code_of([&] { m.abort("nope"); }), ErrorCode::kUnknownSession);
}

TEST(Session, AbortEndsWithReason) {
  SessionManager m;
  const auto id = m.create().id;
  m.post_response(id, true);
  m.abort(id, "user left");
  const auto ev = m.events(id);
  EXPECT_EQ(ev.back()["type"], "aborted");
  EXPECT_EQ(ev.back()["reason"], "user left");
  EXPECT_EQ(code_of([&] { m.post_response(id, true); }), ErrorCode::kWrongPhase);
}

TEST(Session, InvalidOverrides) {
  SessionManager m;
  EXPECT_EQ(code_of([&] { m.create({{"N", 1}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { m.create({{"colour", 1}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { m.create({{"epsilon", 0.6}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { m.create(json::array()); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(m.size(), 0u);
}

TEST(Session, FlipsAreDisclosedOnlyAfterCommit) {
  SessionManager m;
  const auto id = m.create({{"epsilon", 0.3}, {"epsilon_grid", {0.0, 0.3}}, {"seed", 4}}).id;
  std::size_t responses = 0;
  while (m.phase(id) == Phase::kQuerying) {
    for (const auto& e : m.events(id)) EXPECT_NE(e["type"], "flipped");
    m.post_response(id, true);
    ++responses;
  }
  ASSERT_EQ(m.phase(id), Phase::kCommitted);
  std::size_t flipped = 0;
  bool after_commit = false;
  for (const auto& e : m.events(id)) {
    if (e["type"] == "commit") after_commit = true;
    if (e["type"] == "flipped") {
      EXPECT_TRUE(after_commit);
      EXPECT_EQ(e["query"], ++flipped);
      for (const auto& r : e.items()) EXPECT_TRUE(r.key() == "type" || r.key() == "query" || r.key() == "flipped" || r.key() == "seq");
    }
  }
  EXPECT_EQ(flipped, responses);
}

// The live agent is the offline one: same seeds, same answers, same trace.
TEST(Session, ReplayMatchesOfflineAgentExactly) {
  for (const double eps : {0.0, 0.2}) {
    for (std::size_t target : {0u, 5u, 11u, 15u}) {
      SessionManager m;
      const std::uint64_t seed = 100 + target;
      const auto id = m.create({{"epsilon", eps}, {"epsilon_grid", {0.0, 0.1, 0.2, 0.3}}, {"seed", seed}}).id;
      const auto events = play_truthfully(m, id, target);
      const auto live = m.trace(id);

      number_entry::Config cfg;
      cfg.epsilon_true = eps;
      AgentConfig ac;
      ac.plan = number_entry::default_plan();
      ac.seed = derive_seed(seed, 0);
      Rng env(derive_seed(seed, 1));
      const auto offline = number_entry::run_entry_episode(cfg, ac, target, env);

      ASSERT_EQ(live.steps.size(), offline.trace.steps.size()) << "eps " << eps << " target " << target;
      for (std::size_t i = 0; i < live.steps.size(); ++i) {
        EXPECT_EQ(row_from_step(live.steps[i]), row_from_step(offline.trace.steps[i])) << "step " << i;
      }

      // The event log alone reconstructs the trace's actions, beliefs and observations.
      std::vector<std::size_t> asked;
      std::vector<std::vector<double>> beliefs;
      std::vector<bool> answers, flips;
      std::optional<std::size_t> committed;
      for (const auto& e : events) {
        if (e["type"] == "created") beliefs.push_back(e["belief"]["dist"]);
        if (e["type"] == "belief") beliefs.push_back(e["dist"]);
        if (e["type"] == "query") asked.push_back(e["cutpoint"]);
        if (e["type"] == "response") answers.push_back(e["bit"] == "above");
        if (e["type"] == "flipped") flips.push_back(e["flipped"]);
        if (e["type"] == "commit") committed = e["n"];
      }
      const number_entry::Layout L(cfg);
      ASSERT_EQ(beliefs.size(), offline.trace.steps.size());
      for (std::size_t i = 0; i < offline.trace.steps.size(); ++i) {
        const auto& st = offline.trace.steps[i];
        EXPECT_EQ(beliefs[i], number_entry::target_marginal(st.posterior.dist, cfg));
        if (L.is_ask(st.action)) EXPECT_EQ(asked.at(i), L.cutpoint_of(st.action));
        if (i > 0) {
          const bool seen_above = *st.observation == number_entry::kAbove;
          EXPECT_EQ(seen_above, answers.at(i - 1) != flips.at(i - 1));
        }
      }
      EXPECT_EQ(committed, offline.committed);
    }
  }
}

TEST(Session, EventLogIsDeterministicGivenResponses) {
  SessionManager a, b;
  const json cfg{{"epsilon", 0.2}, {"epsilon_grid", {0.0, 0.2}}, {"seed", 9}};
  const auto ia = a.create(cfg).id, ib = b.create(cfg).id;
  const auto ea = play_truthfully(a, ia, 6), eb = play_truthfully(b, ib, 6);
  EXPECT_EQ(ea, eb);
}

TEST(Session, IdleSessionsExpireToGone) {
  FakeClock clock;
  SessionManager m({.ttl_seconds = 60.0, .max_sessions = 8}, clock.fn());
  const auto id = m.create().id;
  const auto other = m.create().id;
  clock.advance(30);
  m.post_response(other, true);
  clock.advance(45);
  EXPECT_EQ(m.sweep(), 1u);
  EXPECT_EQ(code_of([&] { m.post_response(id, true); }), ErrorCode::kGone);
  EXPECT_EQ(m.events(id).back()["type"], "aborted");
  EXPECT_EQ(m.events(id).back()["reason"], "ttl");
  EXPECT_EQ(m.phase(other), Phase::kQuerying);
  clock.advance(61);
  EXPECT_EQ(code_of([&] { m.post_response(other, true); }), ErrorCode::kGone);
}

TEST(Session, SessionCountIsBounded) {
  SessionManager m({.ttl_seconds = 1e9, .max_sessions = 2});
  const auto a = m.create().id;
  m.create();
  EXPECT_EQ(code_of([&] { m.create(); }), ErrorCode::kCapacity);
  m.abort(a);
  m.create();  // evicts the finished session
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(code_of([&] { m.events(a); }), ErrorCode::kUnknownSession);
}

TEST(Session, ConcurrentSessionsAreIndependent) {
  SessionManager m;
  std::atomic<int> correct{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t target = (w * 4 + k) % 16;
        const auto id = m.create().id;
        const auto ev = play_truthfully(m, id, target);
        for (const auto& e : ev)
          if (e["type"] == "commit" && e["n"] == target) ++correct;
      }
    });
  }
  for (auto& t : workers) t.join();
  EXPECT_EQ(correct.load(), 16);
}

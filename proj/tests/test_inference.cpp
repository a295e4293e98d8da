#include <vector>

#include <gtest/gtest.h>

#include "aif/inference.hpp"
#include "support.hpp"

using namespace aif;

TEST(Predict, DeltaPriorSelectsColumn) {
  TransitionModel b{{Matrix(2, 2, std::vector<double>{0.9, 0.3, 0.1, 0.7})}};
  const auto out = predict({Dist::delta(2, 0), 0}, 0, b);
  EXPECT_NEAR(out.dist[0], 0.9, 1e-15);
  EXPECT_NEAR(out.dist[1], 0.1, 1e-15);
  EXPECT_EQ(out.timestep, 1u);
}

TEST(Predict, UniformAndIdentityDynamics) {
  TransitionModel uniform{{Matrix::repeat_column({1.0 / 3, 1.0 / 3, 1.0 / 3}, 3)}};
  const auto u = predict({Dist::normalize({0.7, 0.2, 0.1}), 0}, 0, uniform);
  for (double x : u.dist) EXPECT_NEAR(x, 1.0 / 3, 1e-15);
  TransitionModel ident{{Matrix::identity(2)}};
  EXPECT_EQ(predict({Dist::uniform(2), 0}, 0, ident).dist, Dist::uniform(2));
}

TEST(Predict, ActionOutOfRange) {
  TransitionModel ident{{Matrix::identity(2)}};
  try {
    predict({Dist::uniform(2), 0}, 1, ident);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kActionOutOfRange);
  }
}

TEST(Predict, PreservesTotalProbability) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const std::size_t S = 1 + rng.below(6);
    const auto m = oracle::random_model(S, 2, 2, rng);
    const auto q = predict({m.D, 0}, rng.below(2), m.B);
    double t = 0.0;
    for (double x : q.dist) t += x;
    EXPECT_NEAR(t, 1.0, 1e-9);
  }
}

TEST(Correct, IdentityObservationGivesDelta) {
  const auto out = correct({Dist::normalize({0.2, 0.5, 0.3}), 4}, 1, Matrix::identity(3));
  EXPECT_EQ(out.dist, Dist::delta(3, 1));
  EXPECT_EQ(out.timestep, 4u);
}

TEST(Correct, UninformativeSensorIsIdentity) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const std::size_t S = 1 + rng.below(5);
    const auto col = oracle::random_simplex(3, rng);
    const auto a = Matrix::repeat_column(col, S);
    const Belief q{Dist::normalize(oracle::random_simplex(S, rng)), 0};
    const auto out = correct(q, rng.below(3), a);
    for (std::size_t s = 0; s < S; ++s) EXPECT_NEAR(out.dist[s], q.dist[s], 1e-12);
  }
}

TEST(Correct, OneStepBayesMatchesJointEnumeration) {
  // P(o=0|s) = [0.8, 0.2]; joint with the flat prior is [0.4, 0.1].
  const Matrix a(2, 2, std::vector<double>{0.8, 0.2, 0.2, 0.8});
  const auto out = correct({Dist::uniform(2), 0}, 0, a);
  EXPECT_NEAR(out.dist[0], 0.4 / 0.5, 1e-15);
  EXPECT_NEAR(out.dist[1], 0.1 / 0.5, 1e-15);
}

TEST(Correct, ImpossibleObservation) {
  try {
    correct({Dist::delta(2, 0), 0}, 1, Matrix::identity(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kImpossibleObservation);
  }
}

TEST(Filter, EmptyHistoryIsFirstCorrection) {
  Rng rng(2);
  const auto m = oracle::random_model(3, 2, 2, rng);
  const std::vector<std::size_t> obs{1};
  const auto q = filter(m.D, {}, obs, m);
  EXPECT_EQ(q.dist, correct({m.D, 0}, 1, m.A.tables[0]).dist);
}

TEST(Filter, LengthMismatch) {
  Rng rng(2);
  const auto m = oracle::random_model(3, 2, 2, rng);
  const std::vector<std::size_t> a{0, 1}, o{0, 1};
  try {
    filter(m.D, a, o, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(Filter, ThreeStepHmmMatchesJointEnumeration) {
  Rng rng(2025);
  const auto m = oracle::random_model(3, 2, 2, rng);
  const std::vector<std::size_t> a{0, 1, 1}, o{1, 0, 0, 1};
  const auto q = filter(m.D, a, o, m);
  const auto expected = oracle::joint_enumeration_posterior(m, a, o);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(q.dist[s], expected[s], 1e-9);
  EXPECT_EQ(q.timestep, 3u);
}

TEST(Filter, FullyObservedChainEndsAtLastObservation) {
  GenerativeModel m;
  m.num_states = m.num_obs = 3;
  m.num_actions = 1;
  m.A = ObservationModel::shared(Matrix::identity(3));
  m.B.per_action = {Matrix::identity(3)};
  m.C = PreferenceSchedule::stationary(PreferenceMode::kObservations, Dist::uniform(3));
  m.D = Dist::uniform(3);
  const std::vector<std::size_t> a{0, 0}, o{2, 2, 2};
  EXPECT_EQ(filter(m.D, a, o, m).dist, Dist::delta(3, 2));
}

TEST(Filter, EqualsStepwiseComposition) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_model(4, 3, 3, rng);
    std::vector<std::size_t> a, o{rng.below(3)};
    for (int k = 0; k < 4; ++k) {
      a.push_back(rng.below(3));
      o.push_back(rng.below(3));
    }
    Belief q = correct({m.D, 0}, o[0], m.A.tables[0]);
    for (std::size_t k = 0; k < a.size(); ++k) q = correct(predict(q, a[k], m.B), o[k + 1], m.A.tables[0]);
    const auto f = filter(m.D, a, o, m);
    for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(f.dist[s], q.dist[s], 1e-12);
  }
}

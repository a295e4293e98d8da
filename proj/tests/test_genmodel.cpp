#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "aif/genmodel.hpp"
#include "aif/inference.hpp"
#include "aif/model_io.hpp"
#include "support.hpp"

using namespace aif;

namespace {

GenerativeModel simple_valid(std::size_t n) {
  GenerativeModel m;
  m.num_states = m.num_obs = n;
  m.num_actions = 2;
  m.A = ObservationModel::shared(Matrix::identity(n));
  std::vector<double> col(n, 1.0 / static_cast<double>(n));
  m.B.per_action = {Matrix::repeat_column(col, n), Matrix::repeat_column(col, n)};
  m.C = PreferenceSchedule::stationary(PreferenceMode::kObservations, Dist::uniform(n));
  m.D = Dist::uniform(n);
  return m;
}

}  // namespace

TEST(Validate, IdentityAUniformRestIsValid) { EXPECT_TRUE(validate_generative_model(simple_valid(3)).empty()); }

TEST(Validate, PlantedColumnDefectNamesActionAndState) {
  auto m = simple_valid(3);
  m.B.per_action[1].at(0, 2) -= 0.1;  // column sums to 0.9
  const auto v = validate_generative_model(m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("B[action 1] column 2"), std::string::npos) << v[0];
}

TEST(Validate, WrongPreferenceLength) {
  auto m = simple_valid(3);
  m.C = PreferenceSchedule::stationary(PreferenceMode::kObservations, Dist::uniform(4));
  const auto v = validate_generative_model(m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("C entry 0"), std::string::npos);
}

TEST(Validate, StateModeChecksAgainstStateCount) {
  auto m = simple_valid(3);
  m.num_obs = 2;
  m.A = ObservationModel::shared(Matrix::repeat_column({0.5, 0.5}, 3));
  m.C = PreferenceSchedule::stationary(PreferenceMode::kStates, Dist::uniform(3));
  EXPECT_TRUE(validate_generative_model(m).empty());
  m.C.mode = PreferenceMode::kObservations;
  EXPECT_EQ(validate_generative_model(m).size(), 1u);
}

// Random perturbations of a valid model are reported exactly when they break
// column stochasticity.
TEST(Validate, FuzzedPerturbationsDetectedExactly) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    auto m = oracle::random_model(3, 2, 3, rng);
    const bool perturb = rng.bernoulli(0.5);
    if (perturb) {
      const double delta = (rng.bernoulli(0.5) ? 1.0 : -1.0) * (1e-6 + rng.uniform() * 0.1);
      const auto which = rng.below(3);
      if (which == 0) {
        m.A.tables[0].at(rng.below(3), rng.below(3)) += delta;
      } else {
        m.B.per_action[rng.below(2)].at(rng.below(3), rng.below(3)) += delta;
      }
    }
    EXPECT_EQ(validate_generative_model(m).empty(), !perturb);
  }
}

TEST(PreferenceAt, StationaryAndSchedule) {
  const auto p = Dist::normalize({0.9, 0.1});
  const auto stationary = PreferenceSchedule::stationary(PreferenceMode::kObservations, p);
  EXPECT_EQ(preference_at(stationary, 7), p);
  const auto u0 = Dist::normalize({0.2, 0.8});
  const auto u1 = Dist::normalize({0.6, 0.4});
  PreferenceSchedule sched{PreferenceMode::kObservations, {u0, u1}};
  EXPECT_EQ(preference_at(sched, 0), u0);
  EXPECT_EQ(preference_at(sched, 1), u1);
  EXPECT_EQ(preference_at(sched, 5), u1);
}

// A valid model never produces an impossible observation for its own filter
// when the observations are sampled from the same model.
TEST(Validate, ValidModelsNeverYieldImpossibleObservations) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t S = 2 + rng.below(4), O = 2 + rng.below(3), Na = 1 + rng.below(3);
    auto m = oracle::random_model(S, Na, O, rng);
    // sparsify so zeros actually occur
    auto sparsify = [&](Matrix& t) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        t.at(rng.below(t.rows()), c) = 0.0;
        double z = 0.0;
        for (std::size_t r = 0; r < t.rows(); ++r) z += t.at(r, c);
        for (std::size_t r = 0; r < t.rows(); ++r) t.at(r, c) /= z;
      }
    };
    for (auto& t : m.B.per_action) sparsify(t);
    sparsify(m.A.tables[0]);
    ASSERT_TRUE(validate_generative_model(m).empty());
    std::size_t s = sample_index(m.D, rng);
    Belief q{m.D, 0};
    for (int t = 0; t < 50; ++t) {
      const auto o = sample_index(Dist::normalize(m.A.tables[0].column(s)), rng);
      ASSERT_NO_THROW(q = correct(q, o, m.A.tables[0]));
      const auto a = rng.below(Na);
      q = predict(q, a, m.B);
      s = sample_index(Dist::normalize(m.B[a].column(s)), rng);
    }
  }
}

TEST(ModelIo, RoundTripAndStrictness) {
  Rng rng(4);
  const auto m = oracle::random_model(3, 2, 2, rng);
  const auto j = model_to_json(m);
  const auto back = model_from_json(j);
  EXPECT_EQ(back.A, m.A);
  EXPECT_EQ(back.B, m.B);
  EXPECT_EQ(back.num_obs, 2u);

  auto bad = j;
  bad["horizn"] = 2;
  try {
    model_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownKey);
  }
}

TEST(ModelIo, RejectsInvalidColumns) {
  Rng rng(4);
  auto j = model_to_json(oracle::random_model(2, 1, 2, rng));
  j["B"][0][0] = 0.99;
  j["B"][0][2] = 0.5;
  try {
    model_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidModel);
    EXPECT_NE(std::string(e.what()).find("B[action 0]"), std::string::npos);
  }
  auto d = model_to_json(oracle::random_model(2, 1, 2, rng));
  d["D"] = {0.3, 0.3};
  EXPECT_THROW(model_from_json(d), Error);
}

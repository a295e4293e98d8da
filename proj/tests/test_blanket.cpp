#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "aif/blanket.hpp"

using namespace aif;
using namespace aif::blanket;

namespace {

// CMI from an explicit map of joint frequencies.
double map_cmi(const SampleTable& t, std::size_t x, std::size_t y, const std::vector<std::size_t>& z) {
  std::map<std::tuple<std::vector<std::uint32_t>, std::uint32_t, std::uint32_t>, double> xyz;
  std::map<std::pair<std::vector<std::uint32_t>, std::uint32_t>, double> xz, yz;
  std::map<std::vector<std::uint32_t>, double> zz;
  const double n = static_cast<double>(t.num_rows());
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    std::vector<std::uint32_t> key;
    for (auto v : z) key.push_back(t.column(v)[r]);
    const auto a = t.column(x)[r], b = t.column(y)[r];
    xyz[{key, a, b}] += 1 / n;
    xz[{key, a}] += 1 / n;
    yz[{key, b}] += 1 / n;
    zz[key] += 1 / n;
  }
  double total = 0.0;
  for (const auto& [k, p] : xyz) {
    const auto& [key, a, b] = k;
    total += p * std::log(p * zz[key] / (xz[{key, a}] * yz[{key, b}]));
  }
  return total;
}

SampleTable random_table(std::size_t vars, std::size_t rows, std::uint32_t arity, Rng& rng) {
  std::vector<std::string> names;
  std::vector<std::vector<std::uint32_t>> cols(vars, std::vector<std::uint32_t>(rows));
  for (std::size_t v = 0; v < vars; ++v) {
    names.push_back("v" + std::to_string(v));
    for (auto& c : cols[v]) c = static_cast<std::uint32_t>(rng.below(arity));
    cols[v][0] = arity - 1;  // pin the arity
  }
  return SampleTable(names, std::move(cols));
}

SampleTable copy_chain(std::size_t rows, Rng& rng) {
  std::vector<std::uint32_t> a(rows);
  for (auto& x : a) x = rng.bernoulli(0.5) ? 1u : 0u;
  return SampleTable({"A", "B", "C"}, {a, a, a});
}

double hypergeometric_pmf(double k, double K, double n, double N) {
  auto lc = [](double a, double b) { return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1); };
  return std::exp(lc(K, k) + lc(N - K, n - k) - lc(N, n));
}

}  // namespace

TEST(Cmi, CopyChain) {
  Rng rng(1);
  const auto t = copy_chain(100000, rng);
  EXPECT_NEAR(empirical_cmi(t, "A", "C", {}), std::log(2.0), 0.01);
  EXPECT_NEAR(empirical_cmi(t, "A", "C", {"B"}), 0.0, 1e-12);
}

TEST(Cmi, MatchesMapOracleAndNonNegative) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = random_table(4, 50 + rng.below(200), 2 + static_cast<std::uint32_t>(rng.below(2)), rng);
    const std::vector<std::size_t> z = trial % 3 == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{2, 3};
    const double c = empirical_cmi(t, 0, 1, z);
    EXPECT_GE(c, 0.0);
    EXPECT_NEAR(c, map_cmi(t, 0, 1, z), 1e-12);
  }
}

TEST(Cmi, UnknownVariable) {
  Rng rng(3);
  const auto t = copy_chain(10, rng);
  try {
    empirical_cmi(t, "A", "Q", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownVariable);
  }
}

TEST(Hypergeometric, FrequenciesMatchPmf) {
  Rng rng(4);
  const std::uint64_t K = 30, n = 25, N = 80;
  const int draws = 200000;
  std::vector<int> counts(n + 1, 0);
  for (int i = 0; i < draws; ++i) ++counts[detail::hypergeometric(K, n, N, rng)];
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double p = hypergeometric_pmf(static_cast<double>(k), K, n, N);
    const double sd = std::sqrt(draws * p * (1 - p));
    EXPECT_LE(std::abs(counts[k] - draws * p), 5 * sd + 1) << "k " << k;
  }
  EXPECT_EQ(detail::hypergeometric(0, 5, 10, rng), 0u);
  EXPECT_EQ(detail::hypergeometric(10, 5, 10, rng), 5u);
  EXPECT_EQ(detail::hypergeometric(4, 10, 10, rng), 4u);
}

// The contingency-table draw has the same law as shuffling x's rows.
TEST(PermutationThreshold, MatchesLiteralRowShuffle) {
  Rng data(5);
  const auto t = random_table(3, 400, 3, data);
  const std::vector<std::size_t> z{2};
  const int reps = 3000;
  std::vector<double> fast, slow;
  Rng r1(6), r2(7);
  std::size_t nz = 0;
  const auto key = detail::strata(t, z, nz);
  const auto observed = detail::count(t.column(0), t.arity(0), t.column(1), t.arity(1), key, nz);
  for (int i = 0; i < reps; ++i) fast.push_back(detail::cmi_table(detail::permuted_table(observed, r1)));
  for (int i = 0; i < reps; ++i) {
    auto x = t.column(0);
    for (std::size_t k = 0; k < nz; ++k) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < key.size(); ++r)
        if (key[r] == k) rows.push_back(r);
      std::vector<std::uint32_t> vals;
      for (auto r : rows) vals.push_back(x[r]);
      r2.shuffle(std::span<std::uint32_t>(vals));
      for (std::size_t j = 0; j < rows.size(); ++j) x[rows[j]] = vals[j];
    }
    slow.push_back(map_cmi(SampleTable({"x", "y", "z"}, {x, t.column(1), t.column(2)}), 0, 1, z));
  }
  auto mean_sd = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / (v.size() - 1))};
  };
  const auto [mf, sf] = mean_sd(fast);
  const auto [ms, ss] = mean_sd(slow);
  EXPECT_LT(std::abs(mf - ms), 4 * std::sqrt(sf * sf / reps + ss * ss / reps));
  std::sort(fast.begin(), fast.end());
  std::sort(slow.begin(), slow.end());
  EXPECT_NEAR(fast[reps * 9 / 10], slow[reps * 9 / 10], 0.15 * slow[reps * 9 / 10]);
}

TEST(PermutationThreshold, ReproducibleAndValidated) {
  Rng data(8);
  const auto t = random_table(3, 1000, 2, data);
  Rng a(9), b(9);
  EXPECT_EQ(permutation_threshold(t, 0, 1, {2}, 100, 0.05, a), permutation_threshold(t, 0, 1, {2}, 100, 0.05, b));
  EXPECT_THROW(permutation_threshold(t, 0, 1, {2}, 99, 0.05, a), Error);
  EXPECT_THROW(permutation_threshold(t, 0, 1, {1}, 100, 0.05, a), Error);
}

TEST(PermutationThreshold, IndependentBitsBelowThresholdAtNominalRate) {
  int below = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    Rng data(derive_seed(s, 0)), perm(derive_seed(s, 1));
    const auto t = random_table(2, 2000, 2, data);
    below += empirical_cmi(t, 0, 1, {}) <= permutation_threshold(t, 0, 1, {}, 200, 0.05, perm) ? 1 : 0;
  }
  // 95% of 200 is 190; 3 sigma of the binomial count is about 9.
  EXPECT_GE(below, 181);
}

TEST(PermutationThreshold, DeterministicDependenceAlwaysExceeds) {
  for (int s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto t = copy_chain(1000, rng);
    EXPECT_GT(empirical_cmi(t, 0, 2, {}), permutation_threshold(t, 0, 2, {}, 100, 0.01, rng));
  }
}

TEST(GrowShrink, ReferenceDagBlanketOfB) {
  for (int s = 0; s < 5; ++s) {
    Rng data(derive_seed(s, 0)), perm(derive_seed(s, 1));
    const auto t = sample_dag(reference_dag(), 100000, data);
    const auto r = grow_shrink(t, "B", {}, perm);
    EXPECT_EQ(r.blanket, (std::vector<std::string>{"A", "C", "D"})) << "seed " << s;
    EXPECT_EQ(r.target, "B");
    ASSERT_EQ(r.stats.size(), 3u);
    for (const auto& st : r.stats) EXPECT_GT(st.cmi, st.threshold);
  }
}

TEST(GrowShrink, IndependentColumnsGiveEmptyBlanket) {
  int empty = 0;
  for (int s = 0; s < 20; ++s) {
    Rng data(derive_seed(s, 0)), perm(derive_seed(s, 1));
    const auto t = random_table(4, 20000, 2, data);
    empty += grow_shrink(t, "v0", {}, perm).blanket.empty() ? 1 : 0;
  }
  EXPECT_GE(empty, 18);
}

TEST(GrowShrink, InvariantToRowOrder) {
  Rng data(11);
  const auto t = sample_dag(reference_dag(), 5000, data);
  std::vector<std::size_t> order(t.num_rows());
  std::iota(order.begin(), order.end(), 0);
  data.shuffle(std::span<std::size_t>(order));
  Rng p1(12), p2(12);
  const auto a = grow_shrink(t, "C", {}, p1);
  const auto b = grow_shrink(t.reordered(order), "C", {}, p2);
  EXPECT_EQ(a.blanket, b.blanket);
  ASSERT_EQ(a.stats.size(), b.stats.size());
  for (std::size_t i = 0; i < a.stats.size(); ++i) {
    EXPECT_NEAR(a.stats[i].cmi, b.stats[i].cmi, 1e-12);
    EXPECT_EQ(a.stats[i].threshold, b.stats[i].threshold);
  }
}

// Random binary DAGs on up to 6 nodes with strong CPT entries: the reported
// blanket contains the target's parents.
TEST(GrowShrink, RecoversParentsOnRandomDags) {
  int hits = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(s, 7));
    BinaryDag dag;
    const std::size_t n = 3 + rng.below(4);
    for (std::size_t v = 0; v < n; ++v) {
      dag.names.push_back("x" + std::to_string(v));
      std::vector<std::size_t> ps;
      for (std::size_t u = 0; u < v; ++u)
        if (ps.size() < 2 && rng.bernoulli(0.4)) ps.push_back(u);
      std::vector<double> cpt(std::size_t{1} << ps.size());
      for (auto& p : cpt) p = rng.bernoulli(0.5) ? 0.1 + 0.2 * rng.uniform() : 0.7 + 0.2 * rng.uniform();
      dag.parents.push_back(ps);
      dag.p_one.push_back(cpt);
    }
    const std::size_t target = rng.below(n);
    const auto t = sample_dag(dag, 100000, rng);
    const auto r = grow_shrink(t, dag.names[target], {}, rng);
    bool ok = true;
    for (auto p : dag.parents[target])
      ok = ok && std::find(r.blanket.begin(), r.blanket.end(), dag.names[p]) != r.blanket.end();
    hits += ok ? 1 : 0;
  }
  EXPECT_GE(hits, 38);
}

TEST(SampleDag, RejectsCycles) {
  BinaryDag d;
  d.names = {"a", "b"};
  d.parents = {{1}, {0}};
  d.p_one = {{0.5, 0.5}, {0.5, 0.5}};
  Rng rng(0);
  EXPECT_THROW(sample_dag(d, 10, rng), Error);
}

TEST(Csv, ParsesAndInfersArity) {
  std::istringstream in("a, b,c\n0,1,2\n1,0,0\n\n0,0,1\n");
  const auto t = read_csv(in);
  EXPECT_EQ(t.num_rows(), 3u);
  EXPECT_EQ(t.names(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(t.arity(2), 3u);
}

TEST(Csv, Errors) {
  std::istringstream ragged("a,b\n0,1\n1\n");
  EXPECT_THROW(read_csv(ragged), Error);
  std::istringstream negative("a,b\n0,-1\n");
  EXPECT_THROW(read_csv(negative), Error);
  std::istringstream text("a\nx\n");
  EXPECT_THROW(read_csv(text), Error);
  std::istringstream header_only("a,b\n");
  EXPECT_THROW(read_csv(header_only), Error);
}

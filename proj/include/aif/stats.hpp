#pragma once

// Small summary statistics for batch comparisons.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "aif/error.hpp"

namespace aif::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double median(std::vector<double> x) {
  if (x.empty()) throw Error(ErrorCode::kLengthMismatch, "median of an empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

struct RankSum {
  /// Mann-Whitney U for the first sample.
  double u = 0.0;
  double z = 0.0;
  /// P(first sample tends to be smaller), normal approximation with tie
  /// correction and continuity correction.
  double p_less = 1.0;
  double p_two_sided = 1.0;
};

/// Wilcoxon rank-sum / Mann-Whitney test, midranks for ties.
inline RankSum rank_sum_test(std::span<const double> x, std::span<const double> y) {
  const std::size_t n1 = x.size(), n2 = y.size();
  if (n1 == 0 || n2 == 0) throw Error(ErrorCode::kLengthMismatch, "rank-sum test needs two non-empty samples");
  struct Item {
    double v;
    bool first;
  };
  std::vector<Item> all;
  all.reserve(n1 + n2);
  for (double v : x) all.push_back({v, true});
  for (double v : y) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  const double n = static_cast<double>(n1 + n2);
  double r1 = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].first) r1 += midrank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  RankSum out;
  const double a = static_cast<double>(n1), b = static_cast<double>(n2);
  out.u = r1 - a * (a + 1.0) / 2.0;
  const double mu = a * b / 2.0;
  const double var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return out;  // every value tied
  const double sd = std::sqrt(var);
  out.z = (out.u - mu) / sd;
  // P(Z <= z) with the continuity correction toward the null.
  out.p_less = 0.5 * std::erfc(-((out.u - mu + 0.5) / sd) / std::sqrt(2.0));
  const double z_abs = std::max(std::abs(out.u - mu) - 0.5, 0.0) / sd;
  out.p_two_sided = std::min(1.0, std::erfc(z_abs / std::sqrt(2.0)));
  return out;
}

}  // namespace aif::stats

#pragma once

// Exact categorical-probability primitives. All logarithms are natural
// (results in nats).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "aif/error.hpp"
#include "aif/rng.hpp"

namespace aif {

/// Smallest probability admitted inside a logarithm.
inline constexpr double kProbFloor = 1e-12;
/// Tolerance on the unit-sum invariant.
inline constexpr double kSumTolerance = 1e-9;

/// A categorical distribution. Weights are non-negative and sum to 1 within
/// kSumTolerance; the length is fixed once constructed.
class Dist {
 public:
  /// Empty placeholder; only useful as a target for assignment.
  Dist() = default;

  /// Scales `raw` to unit sum. Throws kNegativeWeight or kAllZero.
  static Dist normalize(std::span<const double> raw) {
    if (raw.empty()) throw Error(ErrorCode::kLengthMismatch, "distribution needs at least one category");
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!(raw[i] >= 0.0) || !std::isfinite(raw[i])) {
        throw Error(ErrorCode::kNegativeWeight,
                    "weight " + std::to_string(i) + " is negative or not finite");
      }
      total += raw[i];
    }
    if (total <= 0.0) throw Error(ErrorCode::kAllZero, "every weight is zero");
    std::vector<double> w(raw.begin(), raw.end());
    for (auto& x : w) x /= total;
    return Dist(std::move(w));
  }
  static Dist normalize(std::initializer_list<double> raw) {
    return normalize(std::span<const double>(raw.begin(), raw.size()));
  }
  static Dist normalize(const std::vector<double>& raw) { return normalize(std::span<const double>(raw)); }

  static Dist uniform(std::size_t n) { return Dist(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

  static Dist delta(std::size_t n, std::size_t k) {
    std::vector<double> w(n, 0.0);
    w.at(k) = 1.0;
    return Dist(std::move(w));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }
  const std::vector<double>& vector() const noexcept { return w_; }
  auto begin() const noexcept { return w_.begin(); }
  auto end() const noexcept { return w_.end(); }

  /// Index of the largest weight, lowest index on ties.
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(w_.begin(), w_.end()) - w_.begin());
  }

  friend bool operator==(const Dist&, const Dist&) = default;

 private:
  explicit Dist(std::vector<double> w) : w_(std::move(w)) {}
  std::vector<double> w_;
};

inline Dist normalize(std::span<const double> raw) { return Dist::normalize(raw); }

/// True when `w` is a valid distribution within kSumTolerance.
inline bool is_distribution(std::span<const double> w, double tol = kSumTolerance) {
  if (w.empty()) return false;
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tol;
}

/// Applies kProbFloor to every weight and renormalizes.
inline std::vector<double> floored(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  double total = 0.0;
  for (auto& x : out) {
    x = std::max(x, kProbFloor);
    total += x;
  }
  for (auto& x : out) x /= total;
  return out;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}
inline double entropy(const Dist& p) { return entropy(p.values()); }

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch,
                std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b));
  }
}
}  // namespace detail

/// KL(p || q); q is floored before the logarithm.
inline double kl(std::span<const double> p, std::span<const double> q) {
  detail::require_same_length(p.size(), q.size(), "kl");
  const auto qf = floored(q);
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * (std::log(p[i]) - std::log(qf[i]));
  }
  return d;
}
inline double kl(const Dist& p, const Dist& q) { return kl(p.values(), q.values()); }

/// Σ p ln(target) with the target floored; equals minus the cross-entropy.
inline double expected_log(std::span<const double> p, std::span<const double> target) {
  detail::require_same_length(p.size(), target.size(), "expected_log");
  const auto tf = floored(target);
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) v += p[i] * std::log(tf[i]);
  }
  return v;
}
inline double expected_log(const Dist& p, const Dist& target) {
  return expected_log(p.values(), target.values());
}

/// out[i] ∝ exp(-precision * scores[i]).
///
/// An infinite precision is the greedy limit: all mass on the lowest-index
/// minimum.
inline Dist softmax_neg(std::span<const double> scores, double precision = 1.0) {
  if (scores.empty()) throw Error(ErrorCode::kLengthMismatch, "softmax over zero scores");
  if (!(precision > 0.0)) throw Error(ErrorCode::kInvalidConfig, "precision must be positive");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorCode::kNonFiniteScore, "score " + std::to_string(i) + " is not finite");
    }
  }
  const auto min_it = std::min_element(scores.begin(), scores.end());
  if (std::isinf(precision)) {
    return Dist::delta(scores.size(), static_cast<std::size_t>(min_it - scores.begin()));
  }
  const double lo = *min_it;
  std::vector<double> w(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) w[i] = std::exp(-precision * (scores[i] - lo));
  return Dist::normalize(w);
}
inline Dist softmax_neg(std::initializer_list<double> scores, double precision = 1.0) {
  return softmax_neg(std::span<const double>(scores.begin(), scores.size()), precision);
}

/// Inverse-CDF draw; consumes exactly one uniform from `rng`.
inline std::size_t sample_index(const Dist& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace aif

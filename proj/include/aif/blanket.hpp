#pragma once

// Markov blanket discovery over discrete samples: plug-in conditional mutual
// information, permutation thresholds, and grow-shrink.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "aif/error.hpp"
#include "aif/rng.hpp"

namespace aif::blanket {

/// Column-major table of small non-negative integer codes.
class SampleTable {
 public:
  SampleTable() = default;
  SampleTable(std::vector<std::string> names, std::vector<std::vector<std::uint32_t>> columns)
      : names_(std::move(names)), cols_(std::move(columns)) {
    if (names_.size() != cols_.size()) throw Error(ErrorCode::kLengthMismatch, "one name per column required");
    if (cols_.empty() || cols_[0].empty()) throw Error(ErrorCode::kLengthMismatch, "table needs at least one row");
    for (const auto& c : cols_) {
      if (c.size() != cols_[0].size()) throw Error(ErrorCode::kLengthMismatch, "columns differ in length");
      arity_.push_back(*std::max_element(c.begin(), c.end()) + 1);
    }
  }

  std::size_t num_vars() const noexcept { return cols_.size(); }
  std::size_t num_rows() const noexcept { return cols_.empty() ? 0 : cols_[0].size(); }
  const std::string& name(std::size_t v) const { return names_.at(v); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::uint32_t arity(std::size_t v) const { return arity_.at(v); }
  const std::vector<std::uint32_t>& column(std::size_t v) const { return cols_.at(v); }

  std::size_t index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error(ErrorCode::kUnknownVariable, "no variable named '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  /// Same rows in `order`.
  SampleTable reordered(const std::vector<std::size_t>& order) const {
    std::vector<std::vector<std::uint32_t>> cols(cols_.size(), std::vector<std::uint32_t>(order.size()));
    for (std::size_t v = 0; v < cols_.size(); ++v)
      for (std::size_t i = 0; i < order.size(); ++i) cols[v][i] = cols_[v][order[i]];
    return SampleTable(names_, std::move(cols));
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::uint32_t>> cols_;
  std::vector<std::uint32_t> arity_;
};

/// Header row of names, then one row of non-negative integers per sample.
inline SampleTable read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      out.push_back(cell);
    }
    return out;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty CSV");
  ++line_no;
  const auto names = split(line);
  std::vector<std::vector<std::uint32_t>> cols(names.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != names.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(names.size()) + " fields, got " +
                                              std::to_string(cells.size()));
    }
    for (std::size_t v = 0; v < cells.size(); ++v) {
      std::size_t used = 0;
      unsigned long x = 0;
      try {
        x = std::stoul(cells[v], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[v].size() || cells[v].front() == '-') {
        throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": '" + cells[v] +
                                                "' is not a non-negative integer");
      }
      cols[v].push_back(static_cast<std::uint32_t>(x));
    }
  }
  return SampleTable(names, std::move(cols));
}

inline void write_csv(std::ostream& out, const SampleTable& t) {
  for (std::size_t v = 0; v < t.num_vars(); ++v) out << (v ? "," : "") << t.name(v);
  out << '\n';
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    for (std::size_t v = 0; v < t.num_vars(); ++v) out << (v ? "," : "") << t.column(v)[r];
    out << '\n';
  }
}

namespace detail {

/// Mixed-radix stratum key per row for the conditioning set.
inline std::vector<std::uint32_t> strata(const SampleTable& t, const std::vector<std::size_t>& z, std::size_t& count) {
  std::vector<std::uint32_t> key(t.num_rows(), 0);
  std::size_t radix = 1;
  for (auto v : z) {
    const auto& c = t.column(v);
    for (std::size_t i = 0; i < key.size(); ++i) key[i] += static_cast<std::uint32_t>(radix) * c[i];
    radix *= t.arity(v);
  }
  count = radix;
  return key;
}

/// Joint counts n[z][x][y], flattened.
struct Contingency {
  std::size_t nz = 0;
  std::uint32_t ax = 0, ay = 0;
  std::vector<std::uint64_t> n;
  std::uint64_t& at(std::size_t k, std::uint32_t a, std::uint32_t b) { return n[(k * ax + a) * ay + b]; }
  std::uint64_t at(std::size_t k, std::uint32_t a, std::uint32_t b) const { return n[(k * ax + a) * ay + b]; }
};

inline Contingency count(const std::vector<std::uint32_t>& x, std::uint32_t ax, const std::vector<std::uint32_t>& y,
                         std::uint32_t ay, const std::vector<std::uint32_t>& zkey, std::size_t nz) {
  Contingency c{nz, ax, ay, std::vector<std::uint64_t>(nz * ax * ay, 0)};
  for (std::size_t i = 0; i < x.size(); ++i) ++c.at(zkey[i], x[i], y[i]);
  return c;
}

inline double cmi_table(const Contingency& c) {
  std::vector<double> nxz(c.nz * c.ax, 0.0), nyz(c.nz * c.ay, 0.0), nzc(c.nz, 0.0);
  double total_rows = 0.0;
  for (std::size_t k = 0; k < c.nz; ++k)
    for (std::uint32_t a = 0; a < c.ax; ++a)
      for (std::uint32_t b = 0; b < c.ay; ++b) {
        const auto v = static_cast<double>(c.at(k, a, b));
        nxz[k * c.ax + a] += v;
        nyz[k * c.ay + b] += v;
        nzc[k] += v;
        total_rows += v;
      }
  double total = 0.0;
  for (std::size_t k = 0; k < c.nz; ++k)
    for (std::uint32_t a = 0; a < c.ax; ++a)
      for (std::uint32_t b = 0; b < c.ay; ++b) {
        const auto v = static_cast<double>(c.at(k, a, b));
        if (v > 0.0) total += v * std::log(v * nzc[k] / (nxz[k * c.ax + a] * nyz[k * c.ay + b]));
      }
  return std::max(total / total_rows, 0.0);
}

/// Hypergeometric draw: successes among `sample` items taken without
/// replacement from `total`, of which `good` are successes. Inverse
/// transform searching outward from the mode, so the cost grows with the
/// standard deviation rather than the counts.
inline std::uint64_t hypergeometric(std::uint64_t good, std::uint64_t sample, std::uint64_t total, Rng& rng) {
  if (good == 0 || sample == 0) return 0;
  if (good == total) return sample;
  if (sample == total) return good;
  const double K = static_cast<double>(good), n = static_cast<double>(sample), N = static_cast<double>(total);
  const double kmin = std::max(0.0, n - (N - K)), kmax = std::min(K, n);
  const double mode = std::clamp(std::floor((n + 1.0) * (K + 1.0) / (N + 2.0)), kmin, kmax);
  auto lchoose = [](double a, double b) { return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0); };
  const double p_mode = std::exp(lchoose(K, mode) + lchoose(N - K, n - mode) - lchoose(N, n));
  double u = rng.uniform() - p_mode;
  if (u < 0.0) return static_cast<std::uint64_t>(mode);
  double lo = mode, hi = mode, p_lo = p_mode, p_hi = p_mode;
  while (lo > kmin || hi < kmax) {
    if (lo > kmin) {
      p_lo *= lo * (N - K - n + lo) / ((K - lo + 1.0) * (n - lo + 1.0));
      lo -= 1.0;
      u -= p_lo;
      if (u < 0.0) return static_cast<std::uint64_t>(lo);
    }
    if (hi < kmax) {
      p_hi *= (K - hi) * (n - hi) / ((hi + 1.0) * (N - K - n + hi + 1.0));
      hi += 1.0;
      u -= p_hi;
      if (u < 0.0) return static_cast<std::uint64_t>(hi);
    }
  }
  return static_cast<std::uint64_t>(mode);  // rounding left a sliver of mass
}

/// The table a uniformly random within-stratum permutation of x would
/// produce, drawn directly: each y block takes a multivariate
/// hypergeometric share of the stratum's x values.
inline Contingency permuted_table(const Contingency& observed, Rng& rng) {
  Contingency out{observed.nz, observed.ax, observed.ay, std::vector<std::uint64_t>(observed.n.size(), 0)};
  std::vector<std::uint64_t> pool(observed.ax), block(observed.ay);
  for (std::size_t k = 0; k < observed.nz; ++k) {
    std::fill(pool.begin(), pool.end(), 0);
    std::fill(block.begin(), block.end(), 0);
    for (std::uint32_t a = 0; a < observed.ax; ++a)
      for (std::uint32_t b = 0; b < observed.ay; ++b) {
        pool[a] += observed.at(k, a, b);
        block[b] += observed.at(k, a, b);
      }
    for (std::uint32_t b = 0; b < observed.ay; ++b) {
      std::uint64_t left = block[b];
      std::uint64_t remaining = std::accumulate(pool.begin(), pool.end(), std::uint64_t{0});
      for (std::uint32_t a = 0; a < observed.ax; ++a) {
        const std::uint64_t h = a + 1 == observed.ax ? left : hypergeometric(pool[a], left, remaining, rng);
        out.at(k, a, b) = h;
        remaining -= pool[a];
        pool[a] -= h;
        left -= h;
      }
    }
  }
  return out;
}

inline void check_vars(const SampleTable& t, std::size_t x, std::size_t y, const std::vector<std::size_t>& z) {
  if (x >= t.num_vars() || y >= t.num_vars()) throw Error(ErrorCode::kUnknownVariable, "variable index out of range");
  if (x == y) throw Error(ErrorCode::kInvalidConfig, "x and y must differ");
  for (auto v : z) {
    if (v >= t.num_vars()) throw Error(ErrorCode::kUnknownVariable, "variable index out of range");
    if (v == x || v == y) throw Error(ErrorCode::kInvalidConfig, "conditioning set contains x or y");
  }
}

}  // namespace detail

/// Plug-in CMI(x; y | z) in nats.
inline double empirical_cmi(const SampleTable& t, std::size_t x, std::size_t y, const std::vector<std::size_t>& z) {
  detail::check_vars(t, x, y, z);
  std::size_t nz = 0;
  const auto key = detail::strata(t, z, nz);
  return detail::cmi_table(detail::count(t.column(x), t.arity(x), t.column(y), t.arity(y), key, nz));
}

inline double empirical_cmi(const SampleTable& t, const std::string& x, const std::string& y,
                            const std::vector<std::string>& z) {
  std::vector<std::size_t> zi;
  for (const auto& n : z) zi.push_back(t.index_of(n));
  return empirical_cmi(t, t.index_of(x), t.index_of(y), zi);
}

/// (1 - alpha) quantile of CMI with x permuted within each stratum of z:
/// the ceil((1 - alpha) * P)-th smallest of P permuted statistics. The
/// statistic depends on rows only through counts, so each permutation is
/// drawn as its contingency table rather than by shuffling rows.
inline double permutation_threshold(const SampleTable& t, std::size_t x, std::size_t y, const std::vector<std::size_t>& z,
                                    std::size_t num_permutations, double alpha, Rng& rng) {
  detail::check_vars(t, x, y, z);
  if (num_permutations < 100) throw Error(ErrorCode::kInvalidConfig, "at least 100 permutations required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidConfig, "alpha must lie in (0, 1)");
  std::size_t nz = 0;
  const auto key = detail::strata(t, z, nz);
  const auto observed = detail::count(t.column(x), t.arity(x), t.column(y), t.arity(y), key, nz);
  std::vector<double> stats(num_permutations);
  for (auto& s : stats) s = detail::cmi_table(detail::permuted_table(observed, rng));
  std::sort(stats.begin(), stats.end());
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(num_permutations)));
  return stats[std::clamp<std::size_t>(rank, 1, num_permutations) - 1];
}

struct VariableStat {
  std::string var;
  double cmi = 0.0;
  double threshold = 0.0;
};

struct BlanketResult {
  std::string target;
  /// Names in column order.
  std::vector<std::string> blanket;
  /// Final CMI(target; v | blanket \ {v}) and its threshold, one per
  /// non-target variable in column order.
  std::vector<VariableStat> stats;
};

struct GrowShrinkConfig {
  double alpha = 0.01;
  std::size_t num_permutations = 200;
};

/// Grow-shrink. Everything is computed from counts, so row order does not
/// matter. Grow: candidates are tried in descending CMI given
/// the current set (ties to lower column index); the first one above its
/// threshold is added, and the scan restarts. Shrink: members whose CMI given
/// the rest falls below threshold are removed, lowest column first.
inline BlanketResult grow_shrink(const SampleTable& t, const std::string& target, const GrowShrinkConfig& cfg, Rng& rng) {
  const std::size_t tv = t.index_of(target);
  std::vector<std::size_t> set;
  auto without = [&](std::size_t v) {
    std::vector<std::size_t> z;
    for (auto s : set)
      if (s != v) z.push_back(s);
    return z;
  };

  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t v = 0; v < t.num_vars(); ++v) {
      if (v == tv || std::find(set.begin(), set.end(), v) != set.end()) continue;
      cand.emplace_back(empirical_cmi(t, tv, v, set), v);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [cmi, v] : cand) {
      if (cmi > permutation_threshold(t, tv, v, set, cfg.num_permutations, cfg.alpha, rng)) {
        set.push_back(v);
        grew = true;
        break;
      }
    }
  }

  std::sort(set.begin(), set.end());
  for (std::size_t i = 0; i < set.size();) {
    const std::size_t v = set[i];
    const auto z = without(v);
    if (empirical_cmi(t, tv, v, z) <= permutation_threshold(t, tv, v, z, cfg.num_permutations, cfg.alpha, rng)) {
      set.erase(set.begin() + static_cast<long>(i));
    } else {
      ++i;
    }
  }

  BlanketResult out;
  out.target = target;
  for (auto v : set) out.blanket.push_back(t.name(v));
  for (std::size_t v = 0; v < t.num_vars(); ++v) {
    if (v == tv) continue;
    const auto z = without(v);
    out.stats.push_back({t.name(v), empirical_cmi(t, tv, v, z),
                         permutation_threshold(t, tv, v, z, cfg.num_permutations, cfg.alpha, rng)});
  }
  return out;
}

/// A binary Bayesian network: each node lists its parents and P(node = 1)
/// for every parent configuration, first parent as the least significant
/// bit. Parents must form a DAG.
struct BinaryDag {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> parents;
  std::vector<std::vector<double>> p_one;
};

inline SampleTable sample_dag(const BinaryDag& dag, std::size_t rows, Rng& rng) {
  const std::size_t n = dag.names.size();
  std::vector<std::size_t> order;
  std::vector<bool> placed(n, false);
  while (order.size() < n) {
    const std::size_t before = order.size();
    for (std::size_t v = 0; v < n; ++v) {
      if (placed[v]) continue;
      if (std::all_of(dag.parents[v].begin(), dag.parents[v].end(), [&](std::size_t p) { return placed[p]; })) {
        placed[v] = true;
        order.push_back(v);
      }
    }
    if (order.size() == before) throw Error(ErrorCode::kInvalidConfig, "parent lists contain a cycle");
  }
  std::vector<std::vector<std::uint32_t>> cols(n, std::vector<std::uint32_t>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t v : order) {
      std::size_t cfg = 0;
      for (std::size_t k = 0; k < dag.parents[v].size(); ++k) cfg |= static_cast<std::size_t>(cols[dag.parents[v][k]][r]) << k;
      cols[v][r] = rng.uniform() < dag.p_one[v][cfg] ? 1u : 0u;
    }
  }
  return SampleTable(dag.names, std::move(cols));
}

/// A -> B, B -> C, D -> C with every CPT entry 0.2 or 0.8.
inline BinaryDag reference_dag() {
  BinaryDag d;
  d.names = {"A", "B", "C", "D"};
  d.parents = {{}, {0}, {1, 3}, {}};
  d.p_one = {{0.8}, {0.2, 0.8}, {0.2, 0.8, 0.8, 0.2}, {0.2}};
  return d;
}

}  // namespace aif::blanket

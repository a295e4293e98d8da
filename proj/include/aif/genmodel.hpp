#pragma once

// Generative model containers: observation model A, per-action transition
// model B, preference schedule C and initial prior D.
//
// Layout convention, used everywhere: entry(row = outcome, col = condition).
// A.at(o, s) = P(o | s) and B[a].at(s_next, s) = P(s_next | s, a), so every
// column is a distribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "aif/error.hpp"
#include "aif/probmath.hpp"

namespace aif {

/// Dense row-major matrix of probabilities.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::kLengthMismatch, "matrix data has " + std::to_string(data_.size()) +
                                                  " entries, expected " + std::to_string(rows_ * cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  /// Every column equal to `column`.
  static Matrix repeat_column(const std::vector<double>& column, std::size_t cols) {
    Matrix m(column.size(), cols);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < column.size(); ++r) m.at(r, c) = column[r];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& row_major() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// P(o | s). Either one table shared by all actions, or one table per action
/// giving P(o | s, previous action) for models whose sensor depends on the
/// last thing the agent did (e.g. which question was asked).
struct ObservationModel {
  std::vector<Matrix> tables;
  bool action_conditioned = false;

  static ObservationModel shared(Matrix table) { return {{std::move(table)}, false}; }
  static ObservationModel per_action(std::vector<Matrix> tables) { return {std::move(tables), true}; }

  /// Table in force after `last_action`. An action-conditioned model has no
  /// table before the first action.
  const Matrix& table(std::optional<std::size_t> last_action) const {
    if (!action_conditioned) return tables.at(0);
    if (!last_action) {
      throw Error(ErrorCode::kInvalidModel, "action-conditioned observation model needs a previous action");
    }
    if (*last_action >= tables.size()) {
      throw Error(ErrorCode::kActionOutOfRange, "no observation table for action " + std::to_string(*last_action));
    }
    return tables[*last_action];
  }

  friend bool operator==(const ObservationModel&, const ObservationModel&) = default;
};

struct TransitionModel {
  std::vector<Matrix> per_action;

  std::size_t num_actions() const noexcept { return per_action.size(); }
  const Matrix& operator[](std::size_t a) const { return per_action.at(a); }

  friend bool operator==(const TransitionModel&, const TransitionModel&) = default;
};

enum class PreferenceMode { kObservations, kStates };

inline std::string_view to_string(PreferenceMode m) {
  return m == PreferenceMode::kObservations ? "observations" : "states";
}

/// Stationary (one entry) or scheduled by absolute timestep; past the end of
/// the schedule the last entry holds.
struct PreferenceSchedule {
  PreferenceMode mode = PreferenceMode::kObservations;
  std::vector<Dist> entries;

  static PreferenceSchedule stationary(PreferenceMode mode, Dist d) { return {mode, {std::move(d)}}; }

  bool is_stationary() const noexcept { return entries.size() == 1; }

  friend bool operator==(const PreferenceSchedule&, const PreferenceSchedule&) = default;
};

inline const Dist& preference_at(const PreferenceSchedule& c, std::size_t t) {
  if (c.entries.empty()) throw Error(ErrorCode::kInvalidModel, "empty preference schedule");
  return c.entries[std::min(t, c.entries.size() - 1)];
}

struct GenerativeModel {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t num_obs = 0;
  ObservationModel A;
  TransitionModel B;
  PreferenceSchedule C;
  Dist D = Dist::uniform(1);

  friend bool operator==(const GenerativeModel&, const GenerativeModel&) = default;
};

namespace detail {
inline void check_columns(const Matrix& m, const std::string& name, std::vector<std::string>& out) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double total = 0.0;
    bool negative = false;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double x = m.at(r, c);
      if (!(x >= 0.0) || !std::isfinite(x)) negative = true;
      total += x;
    }
    if (negative) {
      out.push_back(name + " column " + std::to_string(c) + " has a negative or non-finite entry");
    } else if (std::abs(total - 1.0) > kSumTolerance) {
      out.push_back(name + " column " + std::to_string(c) + " sums to " + std::to_string(total));
    }
  }
}
}  // namespace detail

/// Every dimension and column-stochasticity violation, with indices. Empty
/// means the model is valid.
inline std::vector<std::string> validate_generative_model(const GenerativeModel& m) {
  std::vector<std::string> out;
  const auto S = m.num_states, Na = m.num_actions, O = m.num_obs;
  if (S == 0) out.push_back("num_states must be positive");
  if (Na == 0) out.push_back("num_actions must be positive");
  if (O == 0) out.push_back("num_obs must be positive");

  const std::size_t expected_tables = m.A.action_conditioned ? Na : 1;
  if (m.A.tables.size() != expected_tables) {
    out.push_back("A has " + std::to_string(m.A.tables.size()) + " tables, expected " +
                  std::to_string(expected_tables));
  }
  for (std::size_t i = 0; i < m.A.tables.size(); ++i) {
    const auto& t = m.A.tables[i];
    const std::string name = m.A.action_conditioned ? "A[action " + std::to_string(i) + "]" : "A";
    if (t.rows() != O || t.cols() != S) {
      out.push_back(name + " is " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ", expected " +
                    std::to_string(O) + "x" + std::to_string(S));
      continue;
    }
    detail::check_columns(t, name, out);
  }

  if (m.B.num_actions() != Na) {
    out.push_back("B has " + std::to_string(m.B.num_actions()) + " action matrices, expected " + std::to_string(Na));
  }
  for (std::size_t a = 0; a < m.B.num_actions(); ++a) {
    const auto& t = m.B.per_action[a];
    if (t.rows() != S || t.cols() != S) {
      out.push_back("B[action " + std::to_string(a) + "] is " + std::to_string(t.rows()) + "x" +
                    std::to_string(t.cols()) + ", expected " + std::to_string(S) + "x" + std::to_string(S));
      continue;
    }
    detail::check_columns(t, "B[action " + std::to_string(a) + "]", out);
  }

  if (m.C.entries.empty()) out.push_back("C has no entries");
  const std::size_t c_len = m.C.mode == PreferenceMode::kObservations ? O : S;
  for (std::size_t i = 0; i < m.C.entries.size(); ++i) {
    if (m.C.entries[i].size() != c_len) {
      out.push_back("C entry " + std::to_string(i) + " has length " + std::to_string(m.C.entries[i].size()) +
                    ", expected " + std::to_string(c_len) + " (mode " + std::string(to_string(m.C.mode)) + ")");
    }
  }
  if (m.D.size() != S) {
    out.push_back("D has length " + std::to_string(m.D.size()) + ", expected " + std::to_string(S));
  }
  return out;
}

/// Throws kInvalidModel listing every violation.
inline void require_valid(const GenerativeModel& m) {
  const auto v = validate_generative_model(m);
  if (v.empty()) return;
  std::string msg;
  for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
  throw Error(ErrorCode::kInvalidModel, msg);
}

}  // namespace aif

#pragma once

// JSON serialization of GenerativeModel.
//
//   {
//     "num_states": S, "num_actions": Na, "num_obs": O,
//     "A": [O*S numbers, row-major]            (shared observation table)
//       or "A_per_action": [[O*S numbers], ...] (one table per action)
//     "B": [[S*S numbers, row-major], ...]      (one per action)
//     "C": {"mode": "observations" | "states", "entries": [[...], ...]}
//     "D": [S numbers]
//   }
//
// A single C entry is a stationary preference; several entries form a
// schedule indexed by absolute timestep. Unknown keys are rejected.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aif/error.hpp"
#include "aif/genmodel.hpp"

namespace aif {

namespace detail {

inline std::vector<double> json_numbers(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kParseError, where + " must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::size_t json_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::kParseError, std::string("missing key ") + key);
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw Error(ErrorCode::kParseError, std::string(key) + " must be a positive integer");
  }
  return v.get<std::size_t>();
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::kUnknownKey, "unknown key '" + k + "' in " + where);
  }
}

inline Matrix json_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& where) {
  auto data = json_numbers(j, where);
  if (data.size() != rows * cols) {
    throw Error(ErrorCode::kInvalidModel, where + " has " + std::to_string(data.size()) + " entries, expected " +
                                              std::to_string(rows * cols));
  }
  return Matrix(rows, cols, std::move(data));
}

inline Dist json_dist(const nlohmann::json& j, const std::string& where, std::vector<std::string>& violations) {
  const auto raw = json_numbers(j, where);
  if (!is_distribution(raw)) violations.push_back(where + " is not a distribution");
  try {
    return Dist::normalize(raw);
  } catch (const Error&) {
    return Dist::uniform(raw.empty() ? 1 : raw.size());
  }
}

}  // namespace detail

/// Parses and validates; throws kInvalidModel with every violation found.
inline GenerativeModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "model must be a JSON object");
  detail::reject_unknown_keys(j, {"num_states", "num_actions", "num_obs", "A", "A_per_action", "B", "C", "D"},
                              "model");
  GenerativeModel m;
  m.num_states = detail::json_count(j, "num_states");
  m.num_actions = detail::json_count(j, "num_actions");
  m.num_obs = detail::json_count(j, "num_obs");

  if (j.contains("A") == j.contains("A_per_action")) {
    throw Error(ErrorCode::kParseError, "exactly one of A or A_per_action is required");
  }
  if (j.contains("A")) {
    m.A = ObservationModel::shared(detail::json_matrix(j.at("A"), m.num_obs, m.num_states, "A"));
  } else {
    const auto& arr = j.at("A_per_action");
    if (!arr.is_array()) throw Error(ErrorCode::kParseError, "A_per_action must be an array");
    std::vector<Matrix> tables;
    for (std::size_t a = 0; a < arr.size(); ++a) {
      tables.push_back(detail::json_matrix(arr[a], m.num_obs, m.num_states, "A_per_action[" + std::to_string(a) + "]"));
    }
    m.A = ObservationModel::per_action(std::move(tables));
  }

  if (!j.contains("B") || !j.at("B").is_array()) throw Error(ErrorCode::kParseError, "B must be an array");
  for (std::size_t a = 0; a < j.at("B").size(); ++a) {
    m.B.per_action.push_back(
        detail::json_matrix(j.at("B")[a], m.num_states, m.num_states, "B[" + std::to_string(a) + "]"));
  }

  std::vector<std::string> violations;
  if (!j.contains("C") || !j.at("C").is_object()) throw Error(ErrorCode::kParseError, "C must be an object");
  const auto& c = j.at("C");
  detail::reject_unknown_keys(c, {"mode", "entries"}, "C");
  const auto mode = c.value("mode", std::string{});
  if (mode == "observations") {
    m.C.mode = PreferenceMode::kObservations;
  } else if (mode == "states") {
    m.C.mode = PreferenceMode::kStates;
  } else {
    throw Error(ErrorCode::kParseError, "C.mode must be \"observations\" or \"states\"");
  }
  if (!c.contains("entries") || !c.at("entries").is_array()) {
    throw Error(ErrorCode::kParseError, "C.entries must be an array");
  }
  for (std::size_t i = 0; i < c.at("entries").size(); ++i) {
    m.C.entries.push_back(detail::json_dist(c.at("entries")[i], "C.entries[" + std::to_string(i) + "]", violations));
  }
  if (!j.contains("D")) throw Error(ErrorCode::kParseError, "missing key D");
  m.D = detail::json_dist(j.at("D"), "D", violations);

  for (auto& v : validate_generative_model(m)) violations.push_back(std::move(v));
  if (!violations.empty()) {
    std::string msg;
    for (const auto& s : violations) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::kInvalidModel, msg);
  }
  return m;
}

inline nlohmann::json model_to_json(const GenerativeModel& m) {
  nlohmann::json j;
  j["num_states"] = m.num_states;
  j["num_actions"] = m.num_actions;
  j["num_obs"] = m.num_obs;
  if (m.A.action_conditioned) {
    auto arr = nlohmann::json::array();
    for (const auto& t : m.A.tables) arr.push_back(t.row_major());
    j["A_per_action"] = std::move(arr);
  } else {
    j["A"] = m.A.tables.at(0).row_major();
  }
  auto b = nlohmann::json::array();
  for (const auto& t : m.B.per_action) b.push_back(t.row_major());
  j["B"] = std::move(b);
  auto entries = nlohmann::json::array();
  for (const auto& e : m.C.entries) entries.push_back(e.vector());
  j["C"] = {{"mode", std::string(to_string(m.C.mode))}, {"entries", std::move(entries)}};
  j["D"] = m.D.vector();
  return j;
}

inline GenerativeModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace aif

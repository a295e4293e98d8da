#pragma once

// EpisodeTrace <-> JSONL. One object per step:
//
//   {"t", "prior", "action", "obs", "posterior", "efe_chosen",
//    "info_gain", "pragmatic"            (information-gain forms)
//    or "risk", "ambiguity"              (risk/ambiguity form),
//    "ms", ["efe_table" when diagnostic]}
//
// "obs" is null for a step without an observation. "ms" is written as 0
// unless timing is requested, so traces are byte-reproducible by default.

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aif/agent.hpp"
#include "aif/error.hpp"

namespace aif {

struct TraceWriteOptions {
  bool timing = false;
};

inline nlohmann::json step_to_json(const StepRecord& r, const TraceWriteOptions& opt = {}) {
  nlohmann::json j;
  j["t"] = r.t;
  j["prior"] = r.prior.dist.vector();
  j["action"] = r.action;
  j["obs"] = r.observation ? nlohmann::json(*r.observation) : nlohmann::json(nullptr);
  j["posterior"] = r.posterior.dist.vector();
  j["efe_chosen"] = r.chosen.efe;
  if (r.chosen.form == EfeForm::kRiskAmbiguity) {
    j["risk"] = r.chosen.risk;
    j["ambiguity"] = r.chosen.ambiguity;
  } else {
    j["info_gain"] = r.chosen.info_gain;
    j["pragmatic"] = r.chosen.pragmatic;
  }
  j["ms"] = opt.timing ? r.ms : 0.0;
  if (!r.efe_table.empty()) j["efe_table"] = r.efe_table;
  return j;
}

inline void write_trace_jsonl(std::ostream& out, const EpisodeTrace& trace, const TraceWriteOptions& opt = {}) {
  for (const auto& r : trace.steps) out << step_to_json(r, opt).dump() << '\n';
}

/// A step as it appears on disk.
struct TraceRow {
  std::size_t t = 0;
  std::vector<double> prior;
  std::size_t action = 0;
  std::optional<std::size_t> obs;
  std::vector<double> posterior;
  double efe_chosen = 0.0;
  std::vector<double> info_gain, pragmatic, risk, ambiguity;
  double ms = 0.0;
  std::vector<double> efe_table;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline TraceRow row_from_step(const StepRecord& r, const TraceWriteOptions& opt = {}) {
  TraceRow row;
  row.t = r.t;
  row.prior = r.prior.dist.vector();
  row.action = r.action;
  row.obs = r.observation;
  row.posterior = r.posterior.dist.vector();
  row.efe_chosen = r.chosen.efe;
  row.info_gain = r.chosen.info_gain;
  row.pragmatic = r.chosen.pragmatic;
  row.risk = r.chosen.risk;
  row.ambiguity = r.chosen.ambiguity;
  row.ms = opt.timing ? r.ms : 0.0;
  row.efe_table = r.efe_table;
  return row;
}

inline std::vector<TraceRow> read_trace_jsonl(std::istream& in) {
  static const std::vector<std::string> kAllowed = {"t",    "prior",     "action", "obs",  "posterior", "efe_chosen",
                                                    "info_gain", "pragmatic", "risk", "ambiguity", "ms", "efe_table"};
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      for (const auto& [k, _] : j.items()) {
        if (std::find(kAllowed.begin(), kAllowed.end(), k) == kAllowed.end()) {
          throw Error(ErrorCode::kUnknownKey, "line " + std::to_string(line_no) + ": unknown key " + k);
        }
      }
      TraceRow r;
      r.t = j.at("t").get<std::size_t>();
      r.prior = j.at("prior").get<std::vector<double>>();
      r.action = j.at("action").get<std::size_t>();
      if (!j.at("obs").is_null()) r.obs = j.at("obs").get<std::size_t>();
      r.posterior = j.at("posterior").get<std::vector<double>>();
      r.efe_chosen = j.at("efe_chosen").get<double>();
      auto opt_vec = [&](const char* key, std::vector<double>& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::vector<double>>();
      };
      opt_vec("info_gain", r.info_gain);
      opt_vec("pragmatic", r.pragmatic);
      opt_vec("risk", r.risk);
      opt_vec("ambiguity", r.ambiguity);
      opt_vec("efe_table", r.efe_table);
      r.ms = j.at("ms").get<double>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace aif

#pragma once

// Seeded batch runs: strict JSON run configs, per-seed episodes (optionally
// on several threads), and CSV / JSONL / JSON artifacts written in seed order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aif/agent.hpp"
#include "aif/blanket.hpp"
#include "aif/dyad.hpp"
#include "aif/error.hpp"
#include "aif/model_io.hpp"
#include "aif/number_entry.hpp"
#include "aif/stats.hpp"
#include "aif/trace_io.hpp"

namespace aif::batch {

enum class Scenario { kNumberEntry, kDyad, kBlanket, kCustom };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kNumberEntry: return "number_entry";
    case Scenario::kDyad: return "dyad";
    case Scenario::kBlanket: return "blanket";
    case Scenario::kCustom: return "custom";
  }
  return "?";
}

struct BlanketParams {
  std::string data;
  std::string target;
  blanket::GrowShrinkConfig search;
};

struct CustomParams {
  std::string model;
  std::size_t max_steps = 50;
};

struct RunConfig {
  Scenario scenario = Scenario::kNumberEntry;
  std::vector<std::uint64_t> seeds;
  std::string out = "out";
  bool diagnostic = false;
  /// Record wall-clock milliseconds; off keeps outputs byte-identical.
  bool timing = false;
  /// Worker threads; 0 means one per hardware thread.
  std::size_t jobs = 1;

  PlanConfig plan = number_entry::default_plan();
  number_entry::Config number_entry;
  std::optional<std::size_t> target;
  dyad::Config dyad;
  BlanketParams blanket;
  CustomParams custom;
};

namespace detail {

inline const std::set<std::string>& keys_for(Scenario s) {
  static const std::set<std::string> common = {"scenario", "seeds", "out", "diagnostic", "timing", "jobs"};
  static const auto with = [](std::initializer_list<std::string> extra) {
    auto k = common;
    k.insert(extra);
    return k;
  };
  static const std::set<std::string> ne = with({"horizon", "precision", "policy_budget", "form", "N", "epsilon_true",
                                                "epsilon_grid", "preference_strength", "wrong_mass", "max_steps", "target"});
  static const std::set<std::string> dy = with({"M", "goal", "start", "max_steps", "goal_sharpness", "system_goal_offset",
                                                "system", "user_model_precision", "user_horizon", "user_precision",
                                                "system_horizon", "system_precision", "policy_budget"});
  static const std::set<std::string> bl = with({"data", "target", "alpha", "permutations"});
  static const std::set<std::string> cu = with({"horizon", "precision", "policy_budget", "form", "model", "max_steps"});
  switch (s) {
    case Scenario::kNumberEntry: return ne;
    case Scenario::kDyad: return dy;
    case Scenario::kBlanket: return bl;
    case Scenario::kCustom: return cu;
  }
  return common;
}

[[noreturn]] inline void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfigError, "'" + key + "' " + what);
}

inline double get_number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "must be a number");
  return j.get<double>();
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad(key, "must be a non-negative integer");
  return j.get<std::size_t>();
}

inline bool get_bool(const nlohmann::json& j, const std::string& key) {
  if (!j.is_boolean()) bad(key, "must be true or false");
  return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key) {
  if (!j.is_string()) bad(key, "must be a string");
  return j.get<std::string>();
}

/// A positive number, or "inf" / "greedy" for infinite precision.
inline double get_precision(const nlohmann::json& j, const std::string& key) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "greedy") return std::numeric_limits<double>::infinity();
    bad(key, "must be a positive number or \"inf\"");
  }
  const double v = get_number(j, key);
  if (!(v > 0.0)) bad(key, "must be positive");
  return v;
}

inline EfeForm get_form(const nlohmann::json& j, const std::string& key) {
  const auto s = get_string(j, key);
  for (auto f : {EfeForm::kObservation, EfeForm::kRiskAmbiguity, EfeForm::kInfoGainStatePreference})
    if (to_string(f) == s) return f;
  bad(key, "must be observation, risk_ambiguity or info_gain_state");
}

inline std::vector<std::uint64_t> get_seeds(const nlohmann::json& j) {
  std::vector<std::uint64_t> out;
  if (j.is_number_integer()) {
    const auto n = j.get<long long>();
    if (n < 0) bad("seeds", "must be a count or a list");
    for (long long i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
  } else if (j.is_array()) {
    for (const auto& s : j) {
      if (!s.is_number_integer() || s.get<long long>() < 0) bad("seeds", "entries must be non-negative integers");
      out.push_back(s.get<std::uint64_t>());
    }
  } else {
    bad("seeds", "must be a count or a list");
  }
  if (out.empty()) bad("seeds", "must not be empty");
  auto sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) bad("seeds", "contains duplicates");
  return out;
}

}  // namespace detail

/// "3" -> 0,1,2; "4,9,2" -> that list. Used for the --seeds flag.
inline nlohmann::json seeds_from_text(const std::string& text) {
  if (text.find(',') == std::string::npos) {
    try {
      std::size_t used = 0;
      const auto n = std::stoll(text, &used);
      if (used == text.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kParseError, "--seeds: '" + text + "' is not a count or a comma-separated list");
  }
  nlohmann::json list = nlohmann::json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoll(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      list.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, "--seeds: '" + item + "' is not an integer");
    }
  }
  return list;
}

/// Builds a RunConfig from a config object with `overrides` applied on top
/// (flags win). Unknown keys raise UnknownKey; bad values ConfigError.
inline RunConfig config_from_json(nlohmann::json j, const nlohmann::json& overrides = nlohmann::json::object()) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "config must be a JSON object");
  for (const auto& [k, v] : overrides.items()) j[k] = v;
  RunConfig cfg;
  if (!j.contains("scenario")) throw Error(ErrorCode::kConfigError, "missing 'scenario'");
  const auto scenario = detail::get_string(j.at("scenario"), "scenario");
  if (scenario == "number_entry") cfg.scenario = Scenario::kNumberEntry;
  else if (scenario == "dyad") cfg.scenario = Scenario::kDyad;
  else if (scenario == "blanket") cfg.scenario = Scenario::kBlanket;
  else if (scenario == "custom") cfg.scenario = Scenario::kCustom;
  else detail::bad("scenario", "must be number_entry, dyad, blanket or custom");
  aif::detail::reject_unknown_keys(j, detail::keys_for(cfg.scenario), std::string(scenario) + " config");

  if (!j.contains("seeds")) throw Error(ErrorCode::kConfigError, "missing 'seeds'");
  cfg.seeds = detail::get_seeds(j.at("seeds"));
  if (j.contains("out")) cfg.out = detail::get_string(j["out"], "out");
  if (j.contains("diagnostic")) cfg.diagnostic = detail::get_bool(j["diagnostic"], "diagnostic");
  if (j.contains("timing")) cfg.timing = detail::get_bool(j["timing"], "timing");
  if (j.contains("jobs")) cfg.jobs = detail::get_count(j["jobs"], "jobs");

  auto read_plan = [&](PlanConfig& p) {
    if (j.contains("horizon")) p.horizon = detail::get_count(j["horizon"], "horizon");
    if (j.contains("precision")) p.precision = detail::get_precision(j["precision"], "precision");
    if (j.contains("policy_budget")) p.policy_budget = detail::get_count(j["policy_budget"], "policy_budget");
    if (j.contains("form")) p.form = detail::get_form(j["form"], "form");
    if (p.horizon == 0) detail::bad("horizon", "must be at least 1");
  };

  switch (cfg.scenario) {
    case Scenario::kNumberEntry: {
      auto& ne = cfg.number_entry;
      read_plan(cfg.plan);
      if (j.contains("N")) ne.N = detail::get_count(j["N"], "N");
      if (j.contains("epsilon_true")) ne.epsilon_true = detail::get_number(j["epsilon_true"], "epsilon_true");
      // Without an explicit grid the agent knows the channel.
      ne.epsilon_grid = {ne.epsilon_true};
      if (j.contains("epsilon_grid")) {
        try {
          ne.epsilon_grid = aif::detail::json_numbers(j["epsilon_grid"], "epsilon_grid");
        } catch (const Error& e) {
          throw Error(ErrorCode::kConfigError, e.what());
        }
      }
      if (j.contains("preference_strength")) ne.preference_strength = detail::get_number(j["preference_strength"], "preference_strength");
      if (j.contains("wrong_mass")) ne.wrong_mass = detail::get_number(j["wrong_mass"], "wrong_mass");
      if (j.contains("max_steps")) ne.max_steps = detail::get_count(j["max_steps"], "max_steps");
      if (j.contains("target") && !j["target"].is_null()) cfg.target = detail::get_count(j["target"], "target");
      try {
        number_entry::validate(ne);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfigError, e.what());
      }
      if (cfg.target && *cfg.target >= ne.N) detail::bad("target", "must be below N");
      break;
    }
    case Scenario::kDyad: {
      auto& d = cfg.dyad;
      if (j.contains("M")) d.M = detail::get_count(j["M"], "M");
      if (j.contains("goal") && !j["goal"].is_null()) d.goal = detail::get_count(j["goal"], "goal");
      if (j.contains("start")) d.start = detail::get_count(j["start"], "start");
      if (j.contains("max_steps")) d.max_steps = detail::get_count(j["max_steps"], "max_steps");
      if (j.contains("goal_sharpness")) d.goal_sharpness = detail::get_number(j["goal_sharpness"], "goal_sharpness");
      if (j.contains("system_goal_offset")) {
        if (!j["system_goal_offset"].is_number_integer()) detail::bad("system_goal_offset", "must be an integer");
        d.system_goal_offset = j["system_goal_offset"].get<int>();
      }
      if (j.contains("system")) {
        const auto s = detail::get_string(j["system"], "system");
        if (s == "aif") d.system = dyad::SystemKind::kActiveInference;
        else if (s == "random") d.system = dyad::SystemKind::kRandom;
        else if (s == "stay") d.system = dyad::SystemKind::kStay;
        else detail::bad("system", "must be aif, random or stay");
      }
      if (j.contains("user_model_precision")) {
        d.user_model_precision = detail::get_number(j["user_model_precision"], "user_model_precision");
      }
      if (j.contains("user_horizon")) d.user.plan.horizon = detail::get_count(j["user_horizon"], "user_horizon");
      if (j.contains("user_precision")) d.user.plan.precision = detail::get_precision(j["user_precision"], "user_precision");
      if (j.contains("system_horizon")) d.system_agent.plan.horizon = detail::get_count(j["system_horizon"], "system_horizon");
      if (j.contains("system_precision")) {
        d.system_agent.plan.precision = detail::get_precision(j["system_precision"], "system_precision");
      }
      if (j.contains("policy_budget")) {
        d.user.plan.policy_budget = d.system_agent.plan.policy_budget = detail::get_count(j["policy_budget"], "policy_budget");
      }
      if (d.user.plan.horizon == 0 || d.system_agent.plan.horizon == 0) detail::bad("horizon", "must be at least 1");
      try {
        dyad::validate(d);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfigError, e.what());
      }
      break;
    }
    case Scenario::kBlanket: {
      auto& b = cfg.blanket;
      if (!j.contains("data")) detail::bad("data", "is required for the blanket scenario");
      if (!j.contains("target")) detail::bad("target", "is required for the blanket scenario");
      b.data = detail::get_string(j["data"], "data");
      b.target = detail::get_string(j["target"], "target");
      if (j.contains("alpha")) b.search.alpha = detail::get_number(j["alpha"], "alpha");
      if (j.contains("permutations")) b.search.num_permutations = detail::get_count(j["permutations"], "permutations");
      if (!(b.search.alpha > 0.0 && b.search.alpha < 1.0)) detail::bad("alpha", "must lie in (0, 1)");
      if (b.search.num_permutations < 100) detail::bad("permutations", "must be at least 100");
      if (!std::filesystem::exists(b.data)) detail::bad("data", "file does not exist: " + b.data);
      break;
    }
    case Scenario::kCustom: {
      cfg.plan = PlanConfig{};
      read_plan(cfg.plan);
      if (!j.contains("model")) detail::bad("model", "is required for the custom scenario");
      cfg.custom.model = detail::get_string(j["model"], "model");
      if (j.contains("max_steps")) cfg.custom.max_steps = detail::get_count(j["max_steps"], "max_steps");
      if (!std::filesystem::exists(cfg.custom.model)) detail::bad("model", "file does not exist: " + cfg.custom.model);
      load_model(cfg.custom.model);  // surface model errors before any episode runs
      break;
    }
  }
  return cfg;
}

/// Reads a config file, then applies overrides. JSON syntax errors carry
/// the parser's line and column.
inline RunConfig parse_config(const std::optional<std::string>& path,
                              const nlohmann::json& overrides = nlohmann::json::object()) {
  nlohmann::json j = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + *path);
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, *path + ": " + e.what());
    }
  }
  return config_from_json(std::move(j), overrides);
}

// ---------------------------------------------------------------------------
// Rows

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_ms(double ms, bool timing) {
  if (!timing) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct NumberEntryRow {
  std::uint64_t seed = 0;
  std::size_t N = 0;
  double eps_true = 0.0;
  std::size_t queries = 0;
  std::optional<std::size_t> committed;
  bool correct = false;
  double cum_surprise = 0.0;
  double ms = 0.0;

  static constexpr const char* kHeader = "seed,N,eps_true,queries,committed,correct,cum_surprise,ms";
  std::string to_csv(bool timing) const {
    return std::to_string(seed) + "," + std::to_string(N) + "," + format_real(eps_true) + "," + std::to_string(queries) +
           "," + (committed ? std::to_string(*committed) : std::string()) + "," + (correct ? "true" : "false") + "," +
           format_real(cum_surprise) + "," + format_ms(ms, timing);
  }
  static NumberEntryRow from_csv(const std::string& line) {
    const auto c = split_csv_line(line);
    if (c.size() != 8) throw Error(ErrorCode::kParseError, "number_entry row needs 8 fields: " + line);
    NumberEntryRow r;
    r.seed = std::stoull(c[0]);
    r.N = std::stoul(c[1]);
    r.eps_true = std::stod(c[2]);
    r.queries = std::stoul(c[3]);
    if (!c[4].empty()) r.committed = std::stoul(c[4]);
    r.correct = c[5] == "true";
    r.cum_surprise = std::stod(c[6]);
    r.ms = std::stod(c[7]);
    return r;
  }
};

struct DyadRow {
  std::uint64_t seed = 0;
  std::size_t M = 0;
  std::size_t g = 0;
  bool aligned = true;
  std::size_t steps_to_goal = 0;
  double frac_goal_q4 = 0.0;
  double surprise_user = 0.0;
  double surprise_system = 0.0;

  static constexpr const char* kHeader = "seed,M,g,aligned,steps_to_goal,frac_goal_q4,surprise_user,surprise_system";
  std::string to_csv() const {
    return std::to_string(seed) + "," + std::to_string(M) + "," + std::to_string(g) + "," + (aligned ? "true" : "false") +
           "," + std::to_string(steps_to_goal) + "," + format_real(frac_goal_q4) + "," + format_real(surprise_user) + "," +
           format_real(surprise_system);
  }
  static DyadRow from_csv(const std::string& line) {
    const auto c = split_csv_line(line);
    if (c.size() != 8) throw Error(ErrorCode::kParseError, "dyad row needs 8 fields: " + line);
    DyadRow r;
    r.seed = std::stoull(c[0]);
    r.M = std::stoul(c[1]);
    r.g = std::stoul(c[2]);
    r.aligned = c[3] == "true";
    r.steps_to_goal = std::stoul(c[4]);
    r.frac_goal_q4 = std::stod(c[5]);
    r.surprise_user = std::stod(c[6]);
    r.surprise_system = std::stod(c[7]);
    return r;
  }
};

struct CustomRow {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  double cum_surprise = 0.0;
  double mean_policy_entropy = 0.0;
  double ms = 0.0;

  static constexpr const char* kHeader = "seed,steps,cum_surprise,mean_policy_entropy,ms";
  std::string to_csv(bool timing) const {
    return std::to_string(seed) + "," + std::to_string(steps) + "," + format_real(cum_surprise) + "," +
           format_real(mean_policy_entropy) + "," + format_ms(ms, timing);
  }
  static CustomRow from_csv(const std::string& line) {
    const auto c = split_csv_line(line);
    if (c.size() != 5) throw Error(ErrorCode::kParseError, "custom row needs 5 fields: " + line);
    return CustomRow{std::stoull(c[0]), std::stoul(c[1]), std::stod(c[2]), std::stod(c[3]), std::stod(c[4])};
  }
};

template <typename Row>
std::vector<Row> read_rows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != Row::kHeader) throw Error(ErrorCode::kParseError, "unexpected CSV header");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(Row::from_csv(line));
    } catch (const std::logic_error& e) {
      throw Error(ErrorCode::kParseError, "bad CSV row '" + line + "': " + e.what());
    }
  }
  return rows;
}

inline nlohmann::json blanket_to_json(const blanket::BlanketResult& r) {
  nlohmann::json j;
  j["target"] = r.target;
  j["blanket"] = r.blanket;
  j["stats"] = nlohmann::json::array();
  for (const auto& s : r.stats) j["stats"].push_back({{"var", s.var}, {"cmi", s.cmi}, {"threshold", s.threshold}});
  return j;
}

inline blanket::BlanketResult blanket_from_json(const nlohmann::json& j) {
  aif::detail::reject_unknown_keys(j, {"target", "blanket", "stats"}, "blanket result");
  blanket::BlanketResult r;
  r.target = j.at("target").get<std::string>();
  r.blanket = j.at("blanket").get<std::vector<std::string>>();
  for (const auto& s : j.at("stats")) {
    aif::detail::reject_unknown_keys(s, {"var", "cmi", "threshold"}, "blanket stat");
    r.stats.push_back({s.at("var").get<std::string>(), s.at("cmi").get<double>(), s.at("threshold").get<double>()});
  }
  return r;
}

inline nlohmann::json turn_to_json(const dyad::Turn& t) {
  return {{"round", t.round},
          {"side", t.side == dyad::Side::kUser ? "user" : "system"},
          {"action", t.action},
          {"z", t.z},
          {"belief", t.belief},
          {"surprise", t.surprise},
          {"policy_entropy", t.policy_entropy}};
}

/// Loader for dyad JSONL traces.
inline std::vector<dyad::Turn> read_dyad_trace(std::istream& in) {
  std::vector<dyad::Turn> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      aif::detail::reject_unknown_keys(j, {"round", "side", "action", "z", "belief", "surprise", "policy_entropy"},
                                       "dyad trace line " + std::to_string(line_no));
      dyad::Turn t;
      t.round = j.at("round").get<std::size_t>();
      const auto side = j.at("side").get<std::string>();
      if (side != "user" && side != "system") throw Error(ErrorCode::kParseError, "bad side '" + side + "'");
      t.side = side == "user" ? dyad::Side::kUser : dyad::Side::kSystem;
      t.action = j.at("action").get<std::size_t>();
      t.z = j.at("z").get<std::size_t>();
      t.belief = j.at("belief").get<std::vector<double>>();
      t.surprise = j.at("surprise").get<double>();
      t.policy_entropy = j.at("policy_entropy").get<double>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "dyad trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

struct Artifact {
  std::string name;  // relative to the output directory
  std::string content;
};

struct EpisodeOutput {
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  std::optional<NumberEntryRow> number_entry;
  std::optional<DyadRow> dyad;
  std::optional<CustomRow> custom;
  std::optional<blanket::BlanketResult> blanket;
  std::vector<Artifact> artifacts;
};

struct BatchResult {
  RunConfig config;
  /// In config seed order.
  std::vector<EpisodeOutput> episodes;
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(episodes.begin(), episodes.end(), [](const auto& e) { return e.error.has_value(); }));
  }
};

namespace detail {

inline std::string jsonl(const EpisodeTrace& trace, bool timing) {
  std::ostringstream ss;
  write_trace_jsonl(ss, trace, TraceWriteOptions{timing});
  return ss.str();
}

inline std::string seed_name(std::uint64_t seed) { return "seed" + std::to_string(seed); }

inline EpisodeOutput run_number_entry(const RunConfig& cfg, std::uint64_t seed) {
  EpisodeOutput out{seed};
  AgentConfig ac;
  ac.plan = cfg.plan;
  ac.seed = derive_seed(seed, 0);
  ac.diagnostic = cfg.diagnostic;
  Rng env(derive_seed(seed, 1));
  const auto o = number_entry::run_entry_episode(cfg.number_entry, ac, cfg.target, env);
  out.number_entry = NumberEntryRow{seed,     cfg.number_entry.N, cfg.number_entry.epsilon_true, o.queries, o.committed,
                                    o.correct, o.cum_surprise,      o.ms};
  if (cfg.diagnostic) out.artifacts.push_back({"traces/number_entry_" + seed_name(seed) + ".jsonl", jsonl(o.trace, cfg.timing)});
  return out;
}

inline EpisodeOutput run_dyad(const RunConfig& cfg, std::uint64_t seed) {
  EpisodeOutput out{seed};
  dyad::Config d = cfg.dyad;
  d.user.seed = derive_seed(seed, 0);
  d.system_agent.seed = derive_seed(seed, 2);
  d.user.diagnostic = d.system_agent.diagnostic = cfg.diagnostic;
  Rng env(derive_seed(seed, 1));
  const auto r = dyad::run_dyad(d, env);
  const auto& s = r.summary;
  out.dyad = DyadRow{seed, d.M, s.goal, d.aligned(), s.steps_to_goal, s.frac_goal_q4, s.surprise_user, s.surprise_system};
  if (cfg.diagnostic) {
    std::ostringstream ss;
    for (const auto& t : r.turns) ss << turn_to_json(t).dump() << '\n';
    out.artifacts.push_back({"traces/dyad_" + seed_name(seed) + ".jsonl", ss.str()});
  }
  return out;
}

inline EpisodeOutput run_blanket(const RunConfig& cfg, const blanket::SampleTable& table, std::uint64_t seed) {
  EpisodeOutput out{seed};
  Rng rng(derive_seed(seed, 0));
  out.blanket = blanket::grow_shrink(table, cfg.blanket.target, cfg.blanket.search, rng);
  out.artifacts.push_back({"blanket_" + seed_name(seed) + ".json", blanket_to_json(*out.blanket).dump(2) + "\n"});
  return out;
}

/// The environment is the model's own generative process: a hidden state
/// drawn from D, observations from A, transitions from B.
inline EpisodeOutput run_custom(const RunConfig& cfg, const GenerativeModel& model, std::uint64_t seed) {
  EpisodeOutput out{seed};
  const auto start = std::chrono::steady_clock::now();
  AgentConfig ac;
  ac.plan = cfg.plan;
  ac.seed = derive_seed(seed, 0);
  ac.diagnostic = cfg.diagnostic;
  Agent agent(model, ac);
  Rng env(derive_seed(seed, 1));
  std::size_t state = sample_index(model.D, env);
  std::optional<std::size_t> last;
  auto emit = [&] { return sample_index(Dist::normalize(model.A.table(last).column(state)), env); };
  std::optional<std::size_t> first;
  if (!model.A.action_conditioned) first = emit();
  const auto trace = run_episode(
      agent,
      [&](std::size_t a) {
        state = sample_index(Dist::normalize(model.B[a].column(state)), env);
        last = a;
        return EnvResponse{emit(), false};
      },
      first, cfg.custom.max_steps);
  double ent = 0.0;
  for (const auto& s : trace.steps) ent += s.policy_entropy;
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  out.custom = CustomRow{seed, trace.steps.size(), trace.cumulative_surprise(),
                         trace.steps.empty() ? 0.0 : ent / static_cast<double>(trace.steps.size()), ms};
  if (cfg.diagnostic) out.artifacts.push_back({"traces/custom_" + seed_name(seed) + ".jsonl", jsonl(trace, cfg.timing)});
  return out;
}

}  // namespace detail

/// One episode per seed. Failures are recorded per episode and do not stop
/// the batch. Output order is config seed order whatever `jobs` is.
inline BatchResult run_batch(const RunConfig& cfg) {
  BatchResult res;
  res.config = cfg;
  res.episodes.resize(cfg.seeds.size());

  std::optional<blanket::SampleTable> table;
  std::optional<GenerativeModel> model;
  if (cfg.scenario == Scenario::kBlanket) {
    std::ifstream in(cfg.blanket.data);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + cfg.blanket.data);
    table = blanket::read_csv(in);
    table->index_of(cfg.blanket.target);
  }
  if (cfg.scenario == Scenario::kCustom) model = load_model(cfg.custom.model);

  auto run_one = [&](std::size_t i) {
    const auto seed = cfg.seeds[i];
    try {
      switch (cfg.scenario) {
        case Scenario::kNumberEntry: res.episodes[i] = detail::run_number_entry(cfg, seed); break;
        case Scenario::kDyad: res.episodes[i] = detail::run_dyad(cfg, seed); break;
        case Scenario::kBlanket: res.episodes[i] = detail::run_blanket(cfg, *table, seed); break;
        case Scenario::kCustom: res.episodes[i] = detail::run_custom(cfg, *model, seed); break;
      }
    } catch (const std::exception& e) {
      res.episodes[i] = EpisodeOutput{seed};
      res.episodes[i].error = e.what();
    }
  };

  std::size_t jobs = cfg.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.jobs;
  jobs = std::min(jobs, cfg.seeds.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) run_one(i);
    return res;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) run_one(i);
    });
  }
  for (auto& t : pool) t.join();
  return res;
}

/// Aggregate numbers for the console and summary.json. No timings, so the
/// file is reproducible.
inline nlohmann::json summarize(const BatchResult& r) {
  nlohmann::json j;
  j["scenario"] = to_string(r.config.scenario);
  j["episodes"] = r.episodes.size();
  j["failures"] = r.failures();
  std::vector<double> a, b, c;
  switch (r.config.scenario) {
    case Scenario::kNumberEntry: {
      for (const auto& e : r.episodes)
        if (e.number_entry) {
          a.push_back(e.number_entry->correct ? 1.0 : 0.0);
          b.push_back(static_cast<double>(e.number_entry->queries));
        }
      j["accuracy"] = stats::mean(a);
      j["mean_queries"] = stats::mean(b);
      if (!b.empty()) {
        const auto k = static_cast<std::size_t>(std::ceil(stats::mean(b)));
        j["baseline_queries"] = k;
        j["baseline_accuracy"] = number_entry::binary_search_expected_accuracy(r.config.number_entry.N,
                                                                                r.config.number_entry.epsilon_true, k);
      }
      break;
    }
    case Scenario::kDyad:
      for (const auto& e : r.episodes)
        if (e.dyad) {
          a.push_back(static_cast<double>(e.dyad->steps_to_goal));
          b.push_back(e.dyad->frac_goal_q4);
          c.push_back(e.dyad->surprise_user);
        }
      if (!a.empty()) j["median_steps_to_goal"] = stats::median(a);
      j["mean_frac_goal_q4"] = stats::mean(b);
      j["mean_surprise_user"] = stats::mean(c);
      break;
    case Scenario::kBlanket: {
      std::map<std::string, std::size_t> counts;
      for (const auto& e : r.episodes)
        if (e.blanket) {
          std::string key;
          for (const auto& v : e.blanket->blanket) key += (key.empty() ? "" : ",") + v;
          ++counts["{" + key + "}"];
        }
      j["blankets"] = counts;
      break;
    }
    case Scenario::kCustom:
      for (const auto& e : r.episodes)
        if (e.custom) a.push_back(e.custom->cum_surprise);
      j["mean_cum_surprise"] = stats::mean(a);
      break;
  }
  return j;
}

/// Rendered CSV for the scenario, header included; empty for blanket runs.
inline std::string render_csv(const BatchResult& r) {
  std::ostringstream ss;
  switch (r.config.scenario) {
    case Scenario::kNumberEntry:
      ss << NumberEntryRow::kHeader << '\n';
      for (const auto& e : r.episodes)
        if (e.number_entry) ss << e.number_entry->to_csv(r.config.timing) << '\n';
      break;
    case Scenario::kDyad:
      ss << DyadRow::kHeader << '\n';
      for (const auto& e : r.episodes)
        if (e.dyad) ss << e.dyad->to_csv() << '\n';
      break;
    case Scenario::kCustom:
      ss << CustomRow::kHeader << '\n';
      for (const auto& e : r.episodes)
        if (e.custom) ss << e.custom->to_csv(r.config.timing) << '\n';
      break;
    case Scenario::kBlanket:
      break;
  }
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

/// Writes <scenario>.csv, per-episode artifacts, failures.txt (when any)
/// and summary.json under the configured output directory. Returns the
/// paths written, in write order.
inline std::vector<std::filesystem::path> emit_results(const BatchResult& r) {
  const std::filesystem::path dir(r.config.out);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& rel, const std::string& content) {
    write_file(dir / rel, content);
    written.push_back(dir / rel);
  };
  if (r.config.scenario != Scenario::kBlanket) put(std::string(to_string(r.config.scenario)) + ".csv", render_csv(r));
  for (const auto& e : r.episodes)
    for (const auto& a : e.artifacts) put(a.name, a.content);
  if (r.failures() > 0) {
    std::ostringstream ss;
    for (const auto& e : r.episodes)
      if (e.error) ss << "seed " << e.seed << ": " << *e.error << '\n';
    put("failures.txt", ss.str());
  }
  put("summary.json", summarize(r).dump(2) + "\n");
  return written;
}

}  // namespace aif::batch

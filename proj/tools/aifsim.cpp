// aifsim: seeded batch runs, model validation and the live session server.
//
//   aifsim simulate --seeds 100 --epsilon-true 0.2 --out out/
//   aifsim dyad --config configs/dyad.json --jobs 4
//   aifsim blanket --data samples.csv --target B
//   aifsim simulate --model my_model.json --seeds 10
//   aifsim validate-model my_model.json
//   aifsim serve --port 8080
//
// Exit codes: 0 success, 2 config error, 3 episode failure(s).

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "aif/batch.hpp"
#include "aif/server.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

enum class Kind { kNumber, kText, kList };

struct Override {
  std::string flag;
  std::string key;
  Kind kind;
  std::string help;
};

const std::vector<Override> kNumberEntryFlags = {
    {"--N", "N", Kind::kNumber, "number of candidate values"},
    {"--epsilon-true", "epsilon_true", Kind::kNumber, "channel flip probability"},
    {"--epsilon-grid", "epsilon_grid", Kind::kList, "comma-separated flip hypotheses"},
    {"--preference-strength", "preference_strength", Kind::kNumber, "preference mass on a correct commit"},
    {"--wrong-mass", "wrong_mass", Kind::kNumber, "preference mass on a wrong commit"},
    {"--max-steps", "max_steps", Kind::kNumber, "step limit per episode"},
    {"--target", "target", Kind::kNumber, "fixed target (default: drawn per seed)"},
    {"--horizon", "horizon", Kind::kNumber, "planning horizon"},
    {"--precision", "precision", Kind::kText, "policy precision, or inf for greedy"},
    {"--policy-budget", "policy_budget", Kind::kNumber, "maximum policies scored per step"},
    {"--form", "form", Kind::kText, "observation | risk_ambiguity | info_gain_state"},
    {"--model", "model", Kind::kText, "custom model file (switches to the custom scenario)"},
};

const std::vector<Override> kDyadFlags = {
    {"--M", "M", Kind::kNumber, "ring size"},
    {"--goal", "goal", Kind::kNumber, "fixed goal (default: drawn per seed)"},
    {"--start", "start", Kind::kNumber, "start position"},
    {"--max-steps", "max_steps", Kind::kNumber, "rounds per episode"},
    {"--goal-sharpness", "goal_sharpness", Kind::kNumber, "preference decay per ring step"},
    {"--system-goal-offset", "system_goal_offset", Kind::kNumber, "misalignment of the system's goal"},
    {"--system", "system", Kind::kText, "aif | random | stay"},
    {"--user-model-precision", "user_model_precision", Kind::kNumber, "precision of the system's model of the user"},
    {"--user-horizon", "user_horizon", Kind::kNumber, "user planning horizon"},
    {"--user-precision", "user_precision", Kind::kText, "user policy precision, or inf"},
    {"--system-horizon", "system_horizon", Kind::kNumber, "system planning horizon"},
    {"--system-precision", "system_precision", Kind::kText, "system policy precision, or inf"},
    {"--policy-budget", "policy_budget", Kind::kNumber, "maximum policies scored per step"},
};

const std::vector<Override> kBlanketFlags = {
    {"--data", "data", Kind::kText, "CSV of discrete samples with a header row"},
    {"--target", "target", Kind::kText, "target variable name"},
    {"--alpha", "alpha", Kind::kNumber, "significance level"},
    {"--permutations", "permutations", Kind::kNumber, "permutations per test (>= 100)"},
};

struct BatchCommand {
  CLI::App* app = nullptr;
  std::string scenario;
  std::optional<std::string> config;
  std::optional<std::string> seeds;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  bool diagnostic = false;
  bool timing = false;
  std::map<std::string, std::optional<std::string>> values;
  const std::vector<Override>* flags = nullptr;
};

void add_batch_options(BatchCommand& cmd) {
  auto* app = cmd.app;
  app->add_option("--config", cmd.config, "JSON run config")->check(CLI::ExistingFile);
  app->add_option("--seeds", cmd.seeds, "seed count or comma-separated list");
  app->add_option("--out", cmd.out, "output directory");
  app->add_option("--jobs", cmd.jobs, "worker threads (0 = all cores)");
  app->add_flag("--diagnostic", cmd.diagnostic, "write per-episode JSONL traces");
  app->add_flag("--timing", cmd.timing, "record wall-clock ms (breaks byte-identical re-runs)");
  for (const auto& o : *cmd.flags) app->add_option(o.flag, cmd.values[o.key], o.help);
}

nlohmann::json flag_value(const Override& o, const std::string& text) {
  auto number = [&](const std::string& s) -> nlohmann::json {
    try {
      auto j = nlohmann::json::parse(s);
      if (j.is_number()) return j;
    } catch (const nlohmann::json::parse_error&) {
    }
    throw aif::Error(aif::ErrorCode::kParseError, o.flag + ": '" + s + "' is not a number");
  };
  switch (o.kind) {
    case Kind::kNumber: return number(text);
    case Kind::kText: {
      // Precision flags accept a number too.
      try {
        auto j = nlohmann::json::parse(text);
        if (j.is_number()) return j;
      } catch (const nlohmann::json::parse_error&) {
      }
      return text;
    }
    case Kind::kList: {
      nlohmann::json list = nlohmann::json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) list.push_back(number(item));
      return list;
    }
  }
  return text;
}

nlohmann::json overrides_of(const BatchCommand& cmd) {
  nlohmann::json j = nlohmann::json::object();
  if (cmd.seeds) j["seeds"] = aif::batch::seeds_from_text(*cmd.seeds);
  if (cmd.out) j["out"] = *cmd.out;
  if (cmd.jobs) j["jobs"] = *cmd.jobs;
  if (cmd.diagnostic) j["diagnostic"] = true;
  if (cmd.timing) j["timing"] = true;
  for (const auto& o : *cmd.flags) {
    const auto& v = cmd.values.at(o.key);
    if (v) j[o.key] = flag_value(o, *v);
  }
  return j;
}

int run_batch_command(const BatchCommand& cmd) {
  aif::batch::RunConfig cfg;
  try {
    auto overrides = overrides_of(cmd);
    std::string scenario = cmd.scenario;
    if (scenario == "number_entry" && overrides.contains("model")) scenario = "custom";
    if (cmd.config) {
      std::ifstream in(*cmd.config);
      nlohmann::json file;
      try {
        in >> file;
      } catch (const nlohmann::json::parse_error& e) {
        throw aif::Error(aif::ErrorCode::kParseError, *cmd.config + ": " + e.what());
      }
      if (file.is_object() && file.contains("scenario") && file["scenario"].is_string()) {
        const auto s = file["scenario"].get<std::string>();
        const bool ok = s == scenario || (cmd.scenario == "number_entry" && s == "custom");
        if (!ok) {
          throw aif::Error(aif::ErrorCode::kConfigError,
                           "config scenario '" + s + "' does not match subcommand '" + cmd.app->get_name() + "'");
        }
        scenario = s;
      }
      overrides["scenario"] = scenario;
      cfg = aif::batch::config_from_json(file, overrides);
    } else {
      overrides["scenario"] = scenario;
      if (!overrides.contains("seeds")) overrides["seeds"] = 10;
      cfg = aif::batch::config_from_json(nlohmann::json::object(), overrides);
    }
  } catch (const aif::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const auto result = aif::batch::run_batch(cfg);
    aif::batch::emit_results(result);
    std::cout << aif::batch::summarize(result).dump(2) << "\n";
    for (const auto& e : result.episodes)
      if (e.error) std::cerr << "seed " << e.seed << " failed: " << *e.error << "\n";
    return result.failures() > 0 ? kExitRuntime : 0;
  } catch (const aif::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == aif::ErrorCode::kIo || e.code() == aif::ErrorCode::kParseError ||
                   e.code() == aif::ErrorCode::kUnknownVariable
               ? kExitConfig
               : kExitRuntime;
  }
}

int validate_model(const std::string& path) {
  try {
    const auto m = aif::load_model(path);
    std::cout << path << ": ok (" << m.num_states << " states, " << m.num_obs << " observations, " << m.num_actions
              << " actions)\n";
    return 0;
  } catch (const aif::Error& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete active inference simulations"};
  app.require_subcommand(1);

  BatchCommand simulate{app.add_subcommand("simulate", "number-entry batch (or a custom model via --model)"),
                        "number_entry"};
  simulate.flags = &kNumberEntryFlags;
  add_batch_options(simulate);

  BatchCommand dyad{app.add_subcommand("dyad", "user/system dyad batch"), "dyad"};
  dyad.flags = &kDyadFlags;
  add_batch_options(dyad);

  BatchCommand blanket{app.add_subcommand("blanket", "Markov blanket discovery"), "blanket"};
  blanket.flags = &kBlanketFlags;
  add_batch_options(blanket);

  auto* validate = app.add_subcommand("validate-model", "check a generative model file");
  std::string model_path;
  validate->add_option("file", model_path, "model JSON")->required();

  auto* serve = app.add_subcommand("serve", "run the live number-entry session service");
  aif::server::ServerConfig server_cfg;
  serve->add_option("--host", server_cfg.host, "listen address");
  serve->add_option("--port", server_cfg.port, "listen port (0 picks a free one)");
  serve->add_option("--static", server_cfg.static_dir, "directory served at /");
  serve->add_option("--ttl", server_cfg.sessions.ttl_seconds, "idle seconds before a session is aborted");
  serve->add_option("--max-sessions", server_cfg.sessions.max_sessions, "concurrent session limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*simulate.app) return run_batch_command(simulate);
  if (*dyad.app) return run_batch_command(dyad);
  if (*blanket.app) return run_batch_command(blanket);
  if (*validate) return validate_model(model_path);
  if (*serve) {
    try {
      aif::server::Server server(server_cfg);
      std::cout << "listening on " << server_cfg.host << ":" << server.port() << std::endl;
      server.run();
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "serve: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  return 0;
}

// calibrate: prints the empirical numbers behind the tuned defaults.
//
//   calibrate                      all sections
//   calibrate --section number_entry --seeds 500
//   calibrate --write-reference-data samples.csv --rows 100000 --seed 7

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "aif/blanket.hpp"
#include "aif/dyad.hpp"
#include "aif/number_entry.hpp"
#include "aif/stats.hpp"

namespace {

using namespace aif;

// Lowest max-posterior target probability seen at a commit step.
double min_commit_confidence(const number_entry::Config& cfg, std::size_t horizon, std::size_t seeds) {
  double lowest = 1.0;
  const number_entry::Layout L(cfg);
  for (std::uint64_t s = 0; s < seeds; ++s) {
    AgentConfig ac;
    ac.plan = number_entry::default_plan();
    ac.plan.horizon = horizon;
    ac.seed = derive_seed(s, 0);
    Rng env(derive_seed(s, 1));
    const auto o = number_entry::run_entry_episode(cfg, ac, std::nullopt, env);
    for (const auto& st : o.trace.steps) {
      if (L.is_ask(st.action)) continue;
      const auto m = number_entry::target_marginal(st.posterior.dist, cfg);
      lowest = std::min(lowest, *std::max_element(m.begin(), m.end()));
    }
  }
  return lowest;
}

void number_entry_section(std::size_t seeds) {
  std::printf("number_entry\n");
  for (const auto& grid : {std::vector<double>{0.0}, std::vector<double>{0.0, 0.1, 0.2, 0.3}}) {
    number_entry::Config cfg;
    cfg.epsilon_true = 0.2;
    cfg.epsilon_grid = grid;
    std::printf("  grid size %zu: commit threshold %.4f", grid.size(), number_entry::commit_threshold(cfg));
    if (grid.size() > 1) {
      for (std::size_t h : {1, 2}) {
        std::printf(", min commit confidence h%zu %.4f", h, min_commit_confidence(cfg, h, seeds));
      }
    }
    std::printf("\n");
  }
  for (double precision : {1.0, std::numeric_limits<double>::infinity()}) {
    number_entry::Config cfg;
    cfg.epsilon_true = 0.2;
    std::vector<double> correct, queries;
    for (std::uint64_t s = 0; s < seeds; ++s) {
      AgentConfig ac;
      ac.plan = number_entry::default_plan();
      ac.plan.precision = precision;
      ac.seed = derive_seed(s, 0);
      Rng env(derive_seed(s, 1));
      const auto o = number_entry::run_entry_episode(cfg, ac, std::nullopt, env);
      correct.push_back(o.correct ? 1.0 : 0.0);
      queries.push_back(static_cast<double>(o.queries));
    }
    std::printf("  eps 0.2, precision %g: accuracy %.3f, mean queries %.3f\n", precision, stats::mean(correct),
                stats::mean(queries));
  }
}

void dyad_section(std::size_t seeds) {
  std::printf("dyad\n");
  std::size_t non_rising = 0;
  std::vector<double> aif_steps, random_steps, aligned_q4, misaligned_q4;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    dyad::Config c;
    c.user.seed = derive_seed(s, 0);
    c.system_agent.seed = derive_seed(s, 2);
    Rng e1(derive_seed(s, 1));
    const auto r = dyad::run_dyad(c, e1);
    const auto [first, last] = dyad::user_surprise_quarters(r);
    non_rising += last <= first ? 1 : 0;
    aif_steps.push_back(static_cast<double>(r.summary.steps_to_goal));
    aligned_q4.push_back(r.summary.frac_goal_q4);

    c.system = dyad::SystemKind::kRandom;
    Rng e2(derive_seed(s, 1));
    random_steps.push_back(static_cast<double>(dyad::run_dyad(c, e2).summary.steps_to_goal));

    c.system = dyad::SystemKind::kActiveInference;
    c.system_goal_offset = static_cast<int>(c.M / 2);
    Rng e3(derive_seed(s, 1));
    misaligned_q4.push_back(dyad::run_dyad(c, e3).summary.frac_goal_q4);
  }
  const auto t = stats::rank_sum_test(aif_steps, random_steps);
  std::printf("  user surprise last quarter <= first quarter: %zu/%zu\n", non_rising, seeds);
  std::printf("  median steps to goal: aif %.1f, random %.1f (rank-sum p %.3g)\n", stats::median(aif_steps),
              stats::median(random_steps), t.p_two_sided);
  std::printf("  mean last-quarter time at goal: aligned %.3f, misaligned %.3f\n", stats::mean(aligned_q4),
              stats::mean(misaligned_q4));
}

void blanket_section(std::size_t seeds, std::size_t rows) {
  std::printf("blanket\n");
  std::size_t exact = 0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    Rng data(derive_seed(s, 0)), perm(derive_seed(s, 1));
    const auto table = blanket::sample_dag(blanket::reference_dag(), rows, data);
    const auto r = blanket::grow_shrink(table, "B", {}, perm);
    exact += r.blanket == std::vector<std::string>{"A", "C", "D"} ? 1 : 0;
  }
  std::printf("  reference DAG, target B, %zu rows: exact {A, C, D} in %zu/%zu seeds\n", rows, exact, seeds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration numbers for the tuned defaults"};
  std::string section = "all";
  std::size_t seeds = 200;
  std::size_t blanket_seeds = 20;
  std::size_t rows = 100000;
  std::uint64_t seed = 0;
  std::string data_path;
  app.add_option("--section", section, "number_entry | dyad | blanket | all")
      ->check(CLI::IsMember({"number_entry", "dyad", "blanket", "all"}));
  app.add_option("--seeds", seeds, "episodes per number-entry and dyad measurement");
  app.add_option("--blanket-seeds", blanket_seeds, "datasets for the blanket recovery rate");
  app.add_option("--rows", rows, "rows per sampled dataset");
  app.add_option("--seed", seed, "seed for --write-reference-data");
  app.add_option("--write-reference-data", data_path, "write a sample of the reference DAG as CSV and exit");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!data_path.empty()) {
      Rng rng(seed);
      std::ofstream out(data_path);
      if (!out) throw Error(ErrorCode::kIo, "cannot write " + data_path);
      blanket::write_csv(out, blanket::sample_dag(blanket::reference_dag(), rows, rng));
      return 0;
    }
    if (section == "all" || section == "number_entry") number_entry_section(seeds);
    if (section == "all" || section == "dyad") dyad_section(seeds);
    if (section == "all" || section == "blanket") blanket_section(blanket_seeds, rows);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}

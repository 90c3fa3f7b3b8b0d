#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ilab/dependence.hpp"
#include "ilab/inac.hpp"
#include "ilab/iql.hpp"
#include "ilab/mdp.hpp"
#include "ilab/record.hpp"

namespace ilab {

// Long-run average reward of the greedy policy of value_iteration, from the
// start distribution.
double optimal_average_reward(const FactoredMdp& mdp);

// Mean per-step reward over `episodes` episodes of `episode_len` steps, each
// starting uniformly among the start states.
double mean_episode_reward(const FactoredMdp& mdp, const FactoredPolicy& pi, int episode_len, int episodes,
                           std::uint64_t seed, std::uint64_t tag = 0);
// mean_episode_reward / normalizer (optimal_average_reward when unset).
double normalized_reward(const FactoredMdp& mdp, const FactoredPolicy& pi, int episode_len, int episodes,
                         std::uint64_t seed, std::optional<double> normalizer = std::nullopt, std::uint64_t tag = 0);

enum class Algorithm { kIql, kInac };

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kIql;
  std::string env = "synthetic3";  // or "file"
  std::string grouping = "12";
  std::string mdp_file;
  std::optional<double> gamma;  // overrides synthetic3's γ
  int runs = 20;
  std::vector<std::uint64_t> seeds;  // explicit seeds; otherwise seed, seed+1, ...
  std::uint64_t seed = 0;
  int threads = 1;
  long train_steps = 3000;
  long test_steps = 1000;
  int episode_len = 100;
  long eval_stride = 100;
  double alpha = 0.05;
  std::optional<double> k0 = 0.2;
  long inner_K = 100;
  EtaConfig eta{EtaMode::kExperiment, 0.2};
  Exploration explore{ExplorationKind::kLinearDecay, 0.1};
  std::string out_dir;
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregate;
  double normalizer = 0.0;
  // Last normalized_reward of every run, in seed order.
  std::vector<double> final_scores;
};

FactoredMdp experiment_env(const ExperimentConfig& cfg);
// Runs all seeds; writes runs.csv and aggregate.csv under out_dir when set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct BoundCheck {
  std::string name;
  int agent = -1;
  int policy = -1;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = true;
};

struct VerifyOptions {
  std::optional<SeparableKernel> witness;  // otherwise optimize_dependence
  int random_policies = 2;
  int nonexpansive_samples = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
};

struct VerifyReport {
  double dependence = 0.0;
  std::string dependence_source;
  std::vector<BoundCheck> checks;
  int violations() const;
};

VerifyReport verify_bounds(const FactoredMdp& mdp, const VerifyOptions& opts = {});

}  // namespace ilab

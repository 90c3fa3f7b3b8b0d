#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ilab/iql.hpp"
#include "ilab/mdp.hpp"
#include "ilab/record.hpp"

namespace ilab {

// θ^i indexed [s^i][a^i]. In log-space modes the rows hold normalized
// log-probabilities.
struct SoftmaxParams {
  std::vector<Table> theta;
};

SoftmaxParams zero_params(const FactoredMdp& mdp);
FactoredPolicy softmax_policy(const SoftmaxParams& p);

enum class EtaMode {
  kTheorem,      // theorem schedule on raw parameters
  kConstant,     // fixed η on raw parameters
  kPolicySpace,  // theorem schedule applied to log-probabilities
  kExperiment,   // η0 then Σ_{i<t} η_i / γ^{2t-1}, on log-probabilities
};

struct EtaConfig {
  EtaMode mode = EtaMode::kPolicySpace;
  double value = 0.2;  // η for kConstant, η0 for kExperiment
};

EtaMode parse_eta_mode(const std::string& text);

enum class ExplorationKind { kNone, kConstant, kLinearDecay };

// Sampling policy inside the critic: (1-ε_k)π + ε_k·uniform.
struct Exploration {
  ExplorationKind kind = ExplorationKind::kNone;
  double epsilon = 0.0;
  // kLinearDecay gives ε(1 - k/K).
  double at(long k, long K) const;
};

inline constexpr double kLogFloor = -700.0;

double eta_schedule(int t, double gamma, double joint_action_size, int n, std::span<const double> history);
double experiment_eta(int t, double gamma, double eta0, std::span<const double> history);

// θ^i += η Q^i. With log_space the rows are renormalized in log form and an
// infinite η becomes a greedy step (lowest index on ties).
SoftmaxParams inpg_step(const SoftmaxParams& theta, double eta, std::span<const LocalQTable> qs, bool log_space = false);

// Largest entry-wise gap between the joint policy of the parameter update and
// π(a|s) ∝ π(a|s)·exp(η Σ_i Q^i(s^i,a^i)).
double npg_equivalence_check(const SoftmaxParams& theta, double eta, std::span<const LocalQTable> qs);

struct Trajectory {
  int state = 0;
  RngStream env;
  std::vector<RngStream> agents;
};

Trajectory start_trajectory(const FactoredMdp& mdp, std::uint64_t seed);

struct ItdConfig {
  long K = 1000;
  double alpha = 0.05;
  double k0 = 1.0;
  Exploration explore;
  long stride = 0;  // snapshot period for `on_snapshot`
  std::function<void(long k, std::span<const LocalQTable>)> on_snapshot;
};

// Continues `traj` for K steps under π (ε-mixed for sampling only); per-agent
// expected-backup TD from Q = 0.
std::vector<LocalQTable> itd_steps(const FactoredMdp& mdp, const FactoredPolicy& pi, const ItdConfig& cfg,
                                   Trajectory& traj);
std::vector<LocalQTable> itd_run(const FactoredMdp& mdp, const FactoredPolicy& pi, long K, double alpha, double k0,
                                 std::uint64_t seed);

using ExactCritic = std::function<std::vector<LocalQTable>(const FactoredPolicy&)>;

struct InacConfig {
  int T = 10;
  long K = 1000;
  double alpha = 0.05;
  std::optional<double> k0;  // default from the uniform policy's mixing profile
  EtaConfig eta;
  Exploration explore;
  std::uint64_t seed = 0;
  ExactCritic critic;     // replaces the sampled critic when set
  long inner_stride = 0;  // inner-loop snapshots; 0 disables
};

struct InacResult {
  SoftmaxParams theta;
  FactoredPolicy policy;
  RunRecord record;
  RunRecord inner;
  std::vector<double> etas;
  double k0 = 0.0;
};

InacResult inac_run(const FactoredMdp& mdp, const InacConfig& cfg, const LearnerProbe& probe = {});

}  // namespace ilab

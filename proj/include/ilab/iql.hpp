#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ilab/mdp.hpp"
#include "ilab/record.hpp"

namespace ilab {

// Optional monitoring hooks for learners. Reference entries that are NaN are
// skipped when measuring the error.
struct LearnerProbe {
  using Score = std::function<double(const FactoredPolicy&, long step)>;
  std::vector<LocalQTable> reference;
  // Named joint metrics of the current policy.
  std::vector<std::pair<std::string, Score>> scores;
  // Reference tables that depend on the policy (critic error of INAC).
  std::function<std::vector<LocalQTable>(const FactoredPolicy&)> critic_reference;
};

struct IqlConfig {
  long K = 10000;
  double alpha = 0.05;
  std::optional<double> k0;  // default max(4α, 2·M2·log K)
  std::uint64_t seed = 0;
  FactoredPolicy behavior;  // empty means uniform
  long eval_stride = 0;     // 0 disables snapshots
};

struct IqlResult {
  std::vector<LocalQTable> q;
  FactoredPolicy greedy;
  RunRecord record;
  double k0 = 0.0;
};

struct StepsizeDefaults {
  double alpha = 0.0;
  double k0 = 0.0;
  double sigma_prime = 0.0;
  double m2 = 1.0;
};

// α = 2/(σ'(1-γ)) and k0 = max(4α, 2·M2·log K) under the given policy.
StepsizeDefaults default_stepsize(const FactoredMdp& mdp, const FactoredPolicy& policy, long K);
// k0 alone for a user-supplied α.
double default_k0(const FactoredMdp& mdp, const FactoredPolicy& policy, double alpha, long K);

void check_exploration(const FactoredMdp& mdp, const FactoredPolicy& policy);

IqlResult iql_run(const FactoredMdp& mdp, const IqlConfig& cfg, const LearnerProbe& probe = {});
FactoredPolicy induced_greedy_factored(std::span<const LocalQTable> qs);

// Stream ids shared by the learners.
inline constexpr std::uint64_t kEnvStream = 0;
inline constexpr std::uint64_t kAgentStreamBase = 1;
inline constexpr std::uint64_t kTestStreamBase = 1u << 20;

// Largest entry-wise |q - ref| over non-NaN reference entries, per agent.
double masked_error(const LocalQTable& q, const LocalQTable& ref);

}  // namespace ilab

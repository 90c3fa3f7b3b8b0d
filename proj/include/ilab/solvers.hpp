#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "ilab/mdp.hpp"

namespace ilab {

inline constexpr double kDefaultTol = 1e-10;
inline constexpr long kIterationCap = 1000000;

// Iterates Q <- T*Q from zero until the successive sup-norm difference drops
// below tol(1-γ)/(2γ). `diffs` receives every successive difference.
QTable value_iteration(const FactoredMdp& mdp, double tol = kDefaultTol, std::vector<double>* diffs = nullptr);
JointPolicy greedy_policy(const QTable& q);

// Q_π from (I - γP^π)V = r_π, then Q = R + γPV, polished by iteration if needed.
QTable policy_q(const FactoredMdp& mdp, const JointPolicy& pi, double tol = kDefaultTol);
// Same for the reward of a single agent.
QTable agent_policy_q(const FactoredMdp& mdp, int agent, const JointPolicy& pi, double tol = kDefaultTol);

double optimality_residual(const FactoredMdp& mdp, const QTable& q);
double evaluation_residual(const FactoredMdp& mdp, const JointPolicy& pi, const QTable& q);

struct ChainOptions {
  // When non-empty, analysis is restricted to the pairs reachable from these
  // states; otherwise the whole S×A space must be one communicating class.
  std::vector<int> start_states;
};

struct StationaryDist {
  Table d;  // [s][a]
  double sigma = 0.0;
  double sigma_prime = 0.0;
  std::vector<Table> agent_marginals;  // d'(s^i,a^i)
};

StationaryDist stationary_distribution(const FactoredMdp& mdp, const JointPolicy& pi, double tol = kDefaultTol,
                                       const ChainOptions& opts = {});

struct Optimality {};
struct Evaluation {
  JointPolicy policy;
};
using OperatorKind = std::variant<Optimality, Evaluation>;

enum class ZeroMassCells {
  kError,
  // Zero-mass cells are averaged with uniform weights.
  kUniformWeight,
};

// ΠQ: d-weighted average of Q over each (s^i,a^i) cell.
LocalQTable project_to_agent(const FactoredMdp& mdp, int agent, const Table& weights, const QTable& q,
                             ZeroMassCells zero = ZeroMassCells::kError);
// Φx: x(s^i,a^i) broadcast over joint pairs.
QTable lift_from_agent(const FactoredMdp& mdp, int agent, const LocalQTable& x);

// Fixed point of x -> ΠF^i(Φx).
LocalQTable aggregated_fixed_point(const FactoredMdp& mdp, int agent, const StationaryDist& dist,
                                   const OperatorKind& kind, double tol = kDefaultTol,
                                   ZeroMassCells zero = ZeroMassCells::kError);
// F^i(Q) for the given operator kind.
QTable agent_bellman(const FactoredMdp& mdp, int agent, const OperatorKind& kind, const QTable& q);

struct MixingProfile {
  double m1_hat = 0.0;
  double m2_hat = 1.0;
  double sigma = 0.0;
  double sigma_prime = 0.0;
  std::vector<std::pair<int, double>> decay_curve;
};

MixingProfile mixing_profile(const FactoredMdp& mdp, const JointPolicy& pi, int horizon,
                             const ChainOptions& opts = {});

// Long-run average of Σ_i R^i under π from the mdp's start distribution
// (uniform over start states). Handles reducible chains.
double average_reward(const FactoredMdp& mdp, const JointPolicy& pi);

}  // namespace ilab

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilab/mdp.hpp"

namespace ilab {

// One |S^i| x |S^i| stochastic matrix per agent and local action.
class SeparableKernel {
 public:
  SeparableKernel() = default;
  SeparableKernel(std::vector<int> state_sizes, std::vector<int> action_sizes);

  int num_agents() const { return static_cast<int>(state_sizes_.size()); }
  std::span<const int> state_sizes() const { return state_sizes_; }
  std::span<const int> action_sizes() const { return action_sizes_; }

  // P̂_{a^i}(s^i, ·).
  std::span<double> row(int agent, int a, int s) {
    const int n = state_sizes_[agent];
    return {data_[agent].data() + (static_cast<std::size_t>(a) * n + s) * n, static_cast<std::size_t>(n)};
  }
  std::span<const double> row(int agent, int a, int s) const {
    const int n = state_sizes_[agent];
    return {data_[agent].data() + (static_cast<std::size_t>(a) * n + s) * n, static_cast<std::size_t>(n)};
  }
  std::vector<double>& agent_data(int agent) { return data_[agent]; }
  const std::vector<double>& agent_data(int agent) const { return data_[agent]; }

  // Total number of entries, counting every row coordinate.
  long parameter_count() const;

 private:
  std::vector<int> state_sizes_;
  std::vector<int> action_sizes_;
  std::vector<std::vector<double>> data_;
};

double tv_distance(std::span<const double> p, std::span<const double> q);

// Product row P̂_a(s,·) over joint next states.
void product_row(const SeparableKernel& k, const IndexSpace& states, const IndexSpace& actions, int s, int a,
                 std::vector<double>& out);

void check_kernel(const FactoredMdp& mdp, const SeparableKernel& k);
double max_tv_gap(const FactoredMdp& mdp, const SeparableKernel& k);

SeparableKernel uniform_kernel(const FactoredMdp& mdp);
// Local next-state law of each agent averaged uniformly over the other
// agents' state and action coordinates. Exact on separable inputs.
SeparableKernel marginal_kernel(const FactoredMdp& mdp);
SeparableKernel random_kernel(const FactoredMdp& mdp, RngStream& rng);

struct DependenceConfig {
  int starts = 4;  // random starts in addition to uniform and marginal
  int passes = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  bool lower_bound = true;
};

struct DependenceEstimate {
  double value = 1.0;
  SeparableKernel kernel;
  std::optional<double> certified_lower;
  std::string method;
  int best_start = 0;
};

DependenceEstimate optimize_dependence(const FactoredMdp& mdp, const DependenceConfig& cfg = {});

struct DependenceBracket {
  double lower = 0.0;
  double upper = 1.0;
  SeparableKernel kernel;
};

inline constexpr int kBruteForceParameterCap = 12;

// Exhaustive grid search. TooLarge when the kernel has more than
// kBruteForceParameterCap free parameters or the grid exceeds the budget.
DependenceBracket brute_force_dependence(const FactoredMdp& mdp, int resolution = 32);

// max_i max_{(s,a)} min over local rows of TV between agent i's true local
// next-state marginal and a local row: TV never increases under
// marginalization, so this is a certified lower bound on E.
double marginal_lower_bound(const FactoredMdp& mdp);

FactoredMdp build_separable_mdp(const FactoredMdp& mdp, const SeparableKernel& k);
// Agent i's decoupled MDP in M̂: kernel P̂^i and reward r^i.
FactoredMdp local_mdp(const FactoredMdp& mdp, const SeparableKernel& k, int agent);

}  // namespace ilab

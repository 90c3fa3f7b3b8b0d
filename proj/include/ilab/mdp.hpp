#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/rng.hpp"
#include "ilab/table.hpp"

namespace ilab {

// Mixed-radix encoding, agent 1 (index 0) most significant.
int compose_index(std::span<const int> locals, std::span<const int> sizes);
std::vector<int> decompose_index(int joint, std::span<const int> sizes);

class IndexSpace {
 public:
  IndexSpace() = default;
  explicit IndexSpace(std::vector<int> sizes);

  int size() const { return size_; }
  int rank() const { return static_cast<int>(sizes_.size()); }
  std::span<const int> sizes() const { return sizes_; }
  int size_of(int agent) const { return sizes_[agent]; }

  int compose(std::span<const int> locals) const { return compose_index(locals, sizes_); }
  std::vector<int> decompose(int joint) const { return decompose_index(joint, sizes_); }
  // Local coordinate of `agent` in `joint`, unchecked.
  int component(int joint, int agent) const { return (joint / strides_[agent]) % sizes_[agent]; }
  int stride(int agent) const { return strides_[agent]; }

 private:
  std::vector<int> sizes_;
  std::vector<int> strides_;
  int size_ = 1;
};

// Per-agent reward. Either r[s][a] or r[s][a][s_next] when the reward depends
// on the agent's own next local state.
struct LocalReward {
  int states = 0;
  int actions = 0;
  bool next_state_dependent = false;
  std::vector<double> values;

  static LocalReward state_action(int states, int actions, std::vector<double> values);
  static LocalReward transition(int states, int actions, std::vector<double> values);

  double operator()(int s, int a, int s_next) const {
    return next_state_dependent ? values[(static_cast<std::size_t>(s) * actions + a) * states + s_next]
                                : values[static_cast<std::size_t>(s) * actions + a];
  }
};

// Raw description, as read from disk or produced by a generator.
struct MdpSpec {
  std::vector<int> local_state_sizes;
  std::vector<int> local_action_sizes;
  double gamma = 0.9;
  // Flattened [a][s][s'].
  std::vector<double> transition;
  std::vector<LocalReward> rewards;
  // Upper bound on each agent's reward; empty means 1 for every agent.
  std::vector<double> reward_bounds;
  // Admissible initial joint states; empty means all states.
  std::vector<int> start_states;
};

enum class IssueKind {
  kDimension,
  kRowSum,
  kProbabilityRange,
  kRewardRange,
  kGamma,
  kStartState,
  kNonFinite,
};

struct ValidationIssue {
  IssueKind kind;
  int agent = -1;
  int action = -1;
  int state = -1;
  int next_state = -1;
  double observed = 0.0;
  std::string message;
};

using ValidationReport = std::vector<ValidationIssue>;

inline constexpr double kRowSumTol = 1e-12;

ValidationReport validate(const MdpSpec& spec);
std::string format_report(const ValidationReport& report);

class FactoredMdp {
 public:
  // Validates; rows within kRowSumTol of 1 are renormalized. Throws ValidationError.
  explicit FactoredMdp(MdpSpec spec);

  int num_agents() const { return states_.rank(); }
  const IndexSpace& states() const { return states_; }
  const IndexSpace& actions() const { return actions_; }
  int num_states() const { return states_.size(); }
  int num_actions() const { return actions_.size(); }
  double gamma() const { return spec_.gamma; }

  std::span<const double> row(int a, int s) const {
    const std::size_t S = static_cast<std::size_t>(num_states());
    return {spec_.transition.data() + (static_cast<std::size_t>(a) * S + s) * S, S};
  }
  double prob(int a, int s, int s_next) const { return row(a, s)[s_next]; }

  const LocalReward& local_reward(int agent) const { return spec_.rewards[agent]; }
  double reward_bound(int agent) const { return spec_.reward_bounds[agent]; }
  // Σ_i max(1, bound_i); equals n for unit-bounded rewards.
  double effective_agents() const;

  // E_{s'~P_a(s,.)} r^i(s^i, a^i, s'^i).
  double agent_reward(int agent, int s, int a) const {
    return agent_reward_[(static_cast<std::size_t>(agent) * num_states() + s) * num_actions() + a];
  }
  double expected_reward(int s, int a) const { return total_reward_(s, a); }
  // Realized reward of agent i on the transition (s,a,s').
  double realized_reward(int agent, int s, int a, int s_next) const;

  std::span<const int> start_states() const { return start_states_; }
  const MdpSpec& spec() const { return spec_; }

 private:
  MdpSpec spec_;
  IndexSpace states_;
  IndexSpace actions_;
  std::vector<double> agent_reward_;
  Table total_reward_;
  std::vector<int> start_states_;
};

// Σ_i r^i at the joint pair. IndexError on bad indices.
double total_reward(const FactoredMdp& mdp, int s, int a);
int sample_transition(const FactoredMdp& mdp, int s, int a, RngStream& rng);

JointPolicy joint_policy_of(const FactoredPolicy& fp);
FactoredPolicy uniform_factored_policy(const FactoredMdp& mdp);
// Factored policy with every row an independent draw from the flat Dirichlet.
FactoredPolicy random_factored_policy(const FactoredMdp& mdp, RngStream& rng);
// Throw DimensionMismatch unless shapes match the mdp.
void check_policy_shape(const FactoredMdp& mdp, const FactoredPolicy& fp);
void check_policy_shape(const FactoredMdp& mdp, const JointPolicy& pi);

}  // namespace ilab

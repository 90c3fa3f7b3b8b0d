#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ilab/dependence.hpp"
#include "ilab/mdp.hpp"

namespace ilab {

// Partition of 0-based agent indices into ordered super-agents.
struct Grouping {
  std::vector<std::vector<int>> groups;
};

// "12", "23", "13" (the pair is grouped, the rest stay singletons, groups
// ordered by smallest member) or an explicit 1-based list "1,3;2".
Grouping parse_grouping(std::string_view text, int n);
void check_grouping(const Grouping& g, int n);

// Three binary agents. Agents 1-2 share their bit on the s1=s2 slice: it stays
// when a1=a2 and both flip otherwise; off the slice they jump to (0,0).
// Agent 3 at s3=0 moves to 1 when a2≠a3, otherwise its next bit is uniform.
// Each agent earns 1 when its own bit persists. Starts on the s1=s2 slice.
FactoredMdp synthetic3(double gamma = 0.99);

FactoredMdp grouped_view(const FactoredMdp& mdp, const Grouping& g);
// Joint state/action index of the grouped view for an original joint index.
int grouped_state_index(const FactoredMdp& mdp, const Grouping& g, int s);
int grouped_action_index(const FactoredMdp& mdp, const Grouping& g, int a);

// Kernel for grouped_view(mdp, g): a super-agent keeps the true law of the
// members whose next state is determined by the group's own state and
// action, and moves the remaining members uniformly.
SeparableKernel reference_kernel(const FactoredMdp& mdp, const Grouping& g);

struct RandomMdpSpec {
  std::vector<int> state_sizes;
  std::vector<int> action_sizes;
  double coupling = 0.0;
  std::uint64_t seed = 0;
  double gamma = 0.9;
};

struct RandomMdp {
  FactoredMdp mdp;
  SeparableKernel witness;  // the product part; max_tv_gap ≤ coupling
};

// P_a = (1-λ)·Π_i P^i + λ·Q_a with Dirichlet(1) rows; rewards uniform on [0,1].
RandomMdp random_factored_mdp(const RandomMdpSpec& spec);

}  // namespace ilab

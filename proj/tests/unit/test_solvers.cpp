#include <doctest.h>

#include "ilab/envs.hpp"
#include "ilab/harness.hpp"
#include "ilab/solvers.hpp"
#include "support.hpp"

using namespace ilab;

namespace {

FactoredPolicy fixture_policy(const FactoredMdp& m) {
  FactoredPolicy pi = uniform_factored_policy(m);
  const auto& j = test::oracles()["fixture_policy"];
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < pi.agents[i].rows(); ++s)
      for (int a = 0; a < pi.agents[i].cols(); ++a) pi.agents[i](s, a) = j[i][s][a].get<double>();
  return pi;
}

}  // namespace

TEST_CASE("value iteration matches the oracle") {
  const FactoredMdp m = test::fixture();
  const QTable q = value_iteration(m);
  CHECK(test::max_abs_diff(q, test::oracles()["fixture_qstar"]) < 1e-9);
  CHECK(optimality_residual(m, q) < 1e-9);
  const QTable q3 = value_iteration(synthetic3());
  CHECK(test::max_abs_diff(q3, test::oracles()["synthetic3_qstar"]) < 1e-8);
}

TEST_CASE("policy evaluation matches the oracle") {
  const FactoredMdp m = test::fixture();
  const JointPolicy pi = joint_policy_of(fixture_policy(m));
  const QTable q = policy_q(m, pi);
  CHECK(test::max_abs_diff(q, test::oracles()["fixture_policy_q"]) < 1e-10);
  CHECK(evaluation_residual(m, pi, q) < 1e-10);
  QTable sum(q.rows(), q.cols());
  for (int i = 0; i < m.num_agents(); ++i) {
    const QTable qi = agent_policy_q(m, i, pi);
    for (std::size_t k = 0; k < sum.data().size(); ++k) sum.data()[k] += qi.data()[k];
  }
  CHECK(sup_norm_diff(sum, q) < 1e-10);
}

TEST_CASE("stationary distribution and average reward match the oracle") {
  const FactoredMdp m = test::fixture();
  const JointPolicy pi = joint_policy_of(fixture_policy(m));
  const StationaryDist d = stationary_distribution(m, pi);
  CHECK(test::max_abs_diff(d.d, test::oracles()["fixture_stationary"]) < 1e-10);
  CHECK(average_reward(m, pi) == doctest::Approx(test::oracles()["fixture_average_reward"].get<double>()).epsilon(1e-10));
  double z = 0.0;
  for (double x : d.agent_marginals[1].data()) z += x;
  CHECK(z == doctest::Approx(1.0));
}

TEST_CASE("synthetic3 restricted chain and normalizer") {
  const FactoredMdp m = synthetic3();
  ChainOptions c;
  c.start_states = {m.start_states().begin(), m.start_states().end()};
  const StationaryDist d = stationary_distribution(m, joint_policy_of(uniform_factored_policy(m)), kDefaultTol, c);
  CHECK(test::max_abs_diff(d.d, test::oracles()["synthetic3_uniform_stationary"]) < 1e-9);
  CHECK(optimal_average_reward(m) ==
        doctest::Approx(test::oracles()["synthetic3_optimal_average_reward"].get<double>()).epsilon(1e-9));
  for (const char* g : {"12", "23", "13"})
    CHECK(optimal_average_reward(grouped_view(m, parse_grouping(g, 3))) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("aggregated fixed points match the oracle") {
  const FactoredMdp m = test::fixture();
  const JointPolicy pi = joint_policy_of(fixture_policy(m));
  const StationaryDist du = stationary_distribution(m, joint_policy_of(uniform_factored_policy(m)));
  const StationaryDist dp = stationary_distribution(m, pi);
  for (int i = 0; i < 2; ++i) {
    const LocalQTable a = aggregated_fixed_point(m, i, du, Optimality{});
    CHECK(test::max_abs_diff(a, test::oracles()["fixture_aggregated_optimality"][i]) < 1e-9);
    const LocalQTable b = aggregated_fixed_point(m, i, dp, Evaluation{pi});
    CHECK(test::max_abs_diff(b, test::oracles()["fixture_aggregated_evaluation"][i]) < 1e-9);
  }
}

TEST_CASE("projection is a weighted average and lifting inverts it") {
  const FactoredMdp m = test::fixture();
  RngStream rng(3);
  LocalQTable x(3, 2);
  for (double& v : x.data()) v = rng.uniform();
  const QTable lifted = lift_from_agent(m, 1, x);
  Table w(m.num_states(), m.num_actions());
  for (double& v : w.data()) v = rng.uniform();
  CHECK(sup_norm_diff(project_to_agent(m, 1, w, lifted), x) < 1e-14);
  Table zero(m.num_states(), m.num_actions());
  CHECK_THROWS_AS(project_to_agent(m, 1, zero, lifted), ZeroCellMass);
  CHECK(sup_norm_diff(project_to_agent(m, 1, zero, lifted, ZeroMassCells::kUniformWeight), x) < 1e-14);
}

TEST_CASE("reducible and periodic chains are rejected") {
  MdpSpec s;
  s.local_state_sizes = {2};
  s.local_action_sizes = {1};
  s.gamma = 0.9;
  s.rewards.push_back(LocalReward::state_action(2, 1, {0.0, 0.0}));
  s.transition = {1.0, 0.0, 0.0, 1.0};
  const FactoredMdp absorbing(s);
  CHECK_THROWS_AS(stationary_distribution(absorbing, JointPolicy(2, 1, 1.0)), ReducibleChain);
  s.transition = {0.0, 1.0, 1.0, 0.0};
  const FactoredMdp flip(s);
  CHECK_THROWS_AS(stationary_distribution(flip, JointPolicy(2, 1, 1.0)), PeriodicChain);
}

TEST_CASE("greedy policy breaks ties toward the lowest action") {
  QTable q(2, 3);
  q(0, 1) = 1.0;
  q(0, 2) = 1.0;
  const JointPolicy g = greedy_policy(q);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(1, 0) == 1.0);
}

TEST_CASE("mixing profile decays to zero on an i.i.d. chain") {
  MdpSpec s;
  s.local_state_sizes = {3};
  s.local_action_sizes = {1};
  s.gamma = 0.9;
  s.rewards.push_back(LocalReward::state_action(3, 1, {0.0, 0.0, 0.0}));
  for (int r = 0; r < 3; ++r) s.transition.insert(s.transition.end(), {0.2, 0.3, 0.5});
  const MixingProfile p = mixing_profile(FactoredMdp(s), JointPolicy(3, 1, 1.0), 20);
  CHECK(p.decay_curve[0].second == doctest::Approx(0.8));
  CHECK(p.decay_curve[1].second < 1e-15);
  CHECK(p.m1_hat == 0.0);
}

#include <doctest.h>

#include <sstream>

#include "ilab/envs.hpp"
#include "ilab/harness.hpp"
#include "ilab/io.hpp"
#include "ilab/record.hpp"
#include "support.hpp"

using namespace ilab;

TEST_CASE("grouping shorthands") {
  CHECK(parse_grouping("12", 3).groups == std::vector<std::vector<int>>{{0, 1}, {2}});
  CHECK(parse_grouping("23", 3).groups == std::vector<std::vector<int>>{{0}, {1, 2}});
  CHECK(parse_grouping("13", 3).groups == std::vector<std::vector<int>>{{0, 2}, {1}});
  CHECK(parse_grouping("1,3;2", 3).groups == std::vector<std::vector<int>>{{0, 2}, {1}});
  CHECK_THROWS_AS(parse_grouping("1,2;2", 3), InvalidPartition);
  CHECK_THROWS_AS(parse_grouping("1;2", 3), InvalidPartition);
}

TEST_CASE("synthetic3 dynamics") {
  const FactoredMdp m = synthetic3();
  const IndexSpace& sp = m.states();
  // s = (0,0,0), a = (0,0,1): agents 1,2 stay, agent 3 is forced to 1.
  const int s = sp.compose(std::vector<int>{0, 0, 0});
  const int a = m.actions().compose(std::vector<int>{0, 0, 1});
  CHECK(m.prob(a, s, sp.compose(std::vector<int>{0, 0, 1})) == 1.0);
  // a = (1,0,0): agents 1,2 flip together.
  const int b = m.actions().compose(std::vector<int>{1, 0, 0});
  CHECK(m.prob(b, s, sp.compose(std::vector<int>{1, 1, 0})) == 0.5);
  CHECK(m.expected_reward(s, a) == doctest::Approx(2.0));
  CHECK(m.expected_reward(s, b) == doctest::Approx(0.5));
}

TEST_CASE("grouped views keep the joint law") {
  const FactoredMdp base = synthetic3();
  const Grouping g = parse_grouping("13", 3);
  const FactoredMdp m = grouped_view(base, g);
  CHECK(m.num_agents() == 2);
  CHECK(m.states().size_of(0) == 4);
  for (int s = 0; s < 8; ++s)
    for (int a = 0; a < 8; ++a) {
      CHECK(m.expected_reward(grouped_state_index(base, g, s), grouped_action_index(base, g, a)) ==
            doctest::Approx(base.expected_reward(s, a)));
      for (int t = 0; t < 8; ++t)
        CHECK(m.prob(grouped_action_index(base, g, a), grouped_state_index(base, g, s), grouped_state_index(base, g, t)) ==
              base.prob(a, s, t));
    }
}

TEST_CASE("mdp json round trip") {
  const FactoredMdp m = grouped_view(synthetic3(), parse_grouping("12", 3));
  const FactoredMdp back = mdp_from_json(Json::parse(mdp_to_json(m).dump()));
  CHECK(back.num_states() == m.num_states());
  for (int a = 0; a < m.num_actions(); ++a)
    for (int s = 0; s < m.num_states(); ++s) {
      CHECK(back.expected_reward(s, a) == m.expected_reward(s, a));
      for (int t = 0; t < m.num_states(); ++t) CHECK(back.prob(a, s, t) == m.prob(a, s, t));
    }
  CHECK(std::vector<int>(back.start_states().begin(), back.start_states().end()) ==
        std::vector<int>(m.start_states().begin(), m.start_states().end()));
  Json bad = mdp_to_json(m);
  bad["transition"][0][0][0] = 2.0;
  CHECK_THROWS_AS(mdp_from_json(bad), ValidationError);
  bad = mdp_to_json(m);
  bad.erase("gamma");
  CHECK_THROWS_AS(mdp_spec_from_json(bad), ValidationError);
}

TEST_CASE("kernel json round trip") {
  RandomMdpSpec spec;
  spec.state_sizes = {2, 3};
  spec.action_sizes = {2, 1};
  spec.seed = 2;
  const SeparableKernel k = random_factored_mdp(spec).witness;
  const SeparableKernel back = kernel_from_json(Json::parse(kernel_to_json(k).dump()));
  CHECK(back.row(1, 0, 2)[1] == k.row(1, 0, 2)[1]);
}

TEST_CASE("csv formatting is stable") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  RunRecord r;
  r.add(3, "train", 100, 1, "q_error", 0.25);
  r.add(3, "train", 100, -1, "normalized_reward", 0.5);
  std::ostringstream os;
  write_run_csv(os, std::span<const RunRecord>(&r, 1));
  CHECK(os.str() == "step,seed,agent,metric,value\n100,3,1,q_error,0.25\n100,3,-1,normalized_reward,0.5\n");
}

TEST_CASE("aggregate uses sample standard deviation") {
  std::vector<RunRecord> runs(2);
  runs[0].add(0, "train", 10, -1, "normalized_reward", 1.0);
  runs[1].add(1, "train", 10, -1, "normalized_reward", 3.0);
  const auto rows = aggregate(runs);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean == 2.0);
  CHECK(rows[0].std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("experiment config parsing") {
  const ExperimentConfig c =
      experiment_config_from_json(R"({"algorithm":"inac","grouping":"23","runs":4,"seed":9,"train_steps":500})");
  CHECK(c.algorithm == Algorithm::kInac);
  CHECK(c.grouping == "23");
  CHECK(c.runs == 4);
  CHECK(c.train_steps == 500);
  CHECK_THROWS(experiment_config_from_json(R"({"algorithm":"sarsa"})"));
}

TEST_CASE("the greedy optimal policy attains the normalizer") {
  const FactoredMdp m = grouped_view(synthetic3(), parse_grouping("12", 3));
  const JointPolicy g = greedy_policy(value_iteration(m));
  CHECK(average_reward(m, g) == doctest::Approx(optimal_average_reward(m)));
}

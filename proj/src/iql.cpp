#include "ilab/iql.hpp"

#include <algorithm>
#include <cmath>

#include "ilab/solvers.hpp"

namespace ilab {

double masked_error(const LocalQTable& q, const LocalQTable& ref) {
  if (!q.same_shape(ref)) throw DimensionMismatch("masked_error: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < q.data().size(); ++k) {
    const double r = ref.data()[k];
    if (!std::isnan(r)) m = std::max(m, std::abs(q.data()[k] - r));
  }
  return m;
}

void check_exploration(const FactoredMdp& mdp, const FactoredPolicy& policy) {
  check_policy_shape(mdp, policy);
  for (int i = 0; i < mdp.num_agents(); ++i)
    for (int s = 0; s < policy.agents[i].rows(); ++s)
      for (int a = 0; a < policy.agents[i].cols(); ++a)
        if (!(policy.agents[i](s, a) > 0.0))
          throw ExplorationViolation("agent " + std::to_string(i) + " never takes action " + std::to_string(a) +
                                     " at local state " + std::to_string(s));
}

namespace {

ChainOptions chain_options(const FactoredMdp& mdp) {
  ChainOptions opts;
  if (!mdp.spec().start_states.empty()) opts.start_states = mdp.spec().start_states;
  return opts;
}

}  // namespace

double default_k0(const FactoredMdp& mdp, const FactoredPolicy& policy, double alpha, long K) {
  const MixingProfile mp = mixing_profile(mdp, joint_policy_of(policy), 200, chain_options(mdp));
  return std::max(4.0 * alpha, 2.0 * mp.m2_hat * std::log(static_cast<double>(std::max(2L, K))));
}

StepsizeDefaults default_stepsize(const FactoredMdp& mdp, const FactoredPolicy& policy, long K) {
  const MixingProfile mp = mixing_profile(mdp, joint_policy_of(policy), 200, chain_options(mdp));
  if (!(mp.sigma_prime > 0.0)) throw ZeroCellMass("default stepsize needs every local pair visited (σ' = 0)");
  StepsizeDefaults d;
  d.sigma_prime = mp.sigma_prime;
  d.m2 = mp.m2_hat;
  d.alpha = 2.0 / (mp.sigma_prime * (1.0 - mdp.gamma()));
  d.k0 = std::max(4.0 * d.alpha, 2.0 * mp.m2_hat * std::log(static_cast<double>(std::max(2L, K))));
  return d;
}

FactoredPolicy induced_greedy_factored(std::span<const LocalQTable> qs) {
  FactoredPolicy fp;
  for (const auto& q : qs) {
    LocalPolicy p(q.rows(), q.cols());
    for (int s = 0; s < q.rows(); ++s) p(s, argmax_lowest(q.row(s))) = 1.0;
    fp.agents.push_back(std::move(p));
  }
  return fp;
}

IqlResult iql_run(const FactoredMdp& mdp, const IqlConfig& cfg, const LearnerProbe& probe) {
  if (cfg.K < 1) throw ValidationError("iql: K must be at least 1");
  if (!(cfg.alpha > 0.0)) throw ValidationError("iql: alpha must be positive");
  const int n = mdp.num_agents();
  const FactoredPolicy behavior = cfg.behavior.agents.empty() ? uniform_factored_policy(mdp) : cfg.behavior;
  check_exploration(mdp, behavior);
  const double k0 = cfg.k0 ? *cfg.k0 : default_k0(mdp, behavior, cfg.alpha, cfg.K);
  if (!(k0 > 0.0)) throw ValidationError("iql: k0 must be positive");
  if (!probe.reference.empty() && static_cast<int>(probe.reference.size()) != n)
    throw DimensionMismatch("iql: one reference table per agent expected");

  IqlResult res;
  res.k0 = k0;
  for (int i = 0; i < n; ++i) res.q.emplace_back(mdp.states().size_of(i), mdp.actions().size_of(i));

  RngStream env = RngStream::derive(cfg.seed, 0, kEnvStream);
  std::vector<RngStream> agents;
  for (int i = 0; i < n; ++i) agents.push_back(RngStream::derive(cfg.seed, 0, kAgentStreamBase + i));

  const double gamma = mdp.gamma();
  auto snapshot = [&](long step) {
    for (int i = 0; i < n; ++i) {
      const double hi = mdp.reward_bound(i) / (1.0 - gamma) + 1e-9;
      for (double v : res.q[i].data())
        if (!(v >= -1e-9 && v <= hi)) throw SolverError("iql: iterate left [0, r_max/(1-γ)] at step " + std::to_string(step));
      if (!probe.reference.empty()) res.record.add(cfg.seed, "train", step, i, "q_error", masked_error(res.q[i], probe.reference[i]));
    }
    if (!probe.scores.empty()) {
      const FactoredPolicy greedy = induced_greedy_factored(res.q);
      for (const auto& [name, fn] : probe.scores) res.record.add(cfg.seed, "train", step, -1, name, fn(greedy, step));
    }
  };

  const auto starts = mdp.start_states();
  int s = starts[env.below(starts.size())];
  std::vector<int> local_a(n), local_s(n);
  if (cfg.eval_stride > 0) snapshot(0);
  for (long k = 0; k < cfg.K; ++k) {
    for (int i = 0; i < n; ++i) {
      local_s[i] = mdp.states().component(s, i);
      local_a[i] = static_cast<int>(agents[i].categorical(behavior.agents[i].row(local_s[i])));
    }
    const int a = mdp.actions().compose(local_a);
    const int t = sample_transition(mdp, s, a, env);
    const double step = cfg.alpha / (static_cast<double>(k) + k0);
    for (int i = 0; i < n; ++i) {
      LocalQTable& q = res.q[i];
      const int ti = mdp.states().component(t, i);
      auto next = q.row(ti);
      const double target = mdp.realized_reward(i, s, a, t) + gamma * *std::max_element(next.begin(), next.end());
      double& cur = q(local_s[i], local_a[i]);
      cur += step * (target - cur);
    }
    s = t;
    if (cfg.eval_stride > 0 && (k + 1) % cfg.eval_stride == 0) snapshot(k + 1);
  }
  res.greedy = induced_greedy_factored(res.q);
  return res;
}

}  // namespace ilab

#include "ilab/inac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ilab {

SoftmaxParams zero_params(const FactoredMdp& mdp) {
  SoftmaxParams p;
  for (int i = 0; i < mdp.num_agents(); ++i) p.theta.emplace_back(mdp.states().size_of(i), mdp.actions().size_of(i));
  return p;
}

namespace {

void softmax_row(std::span<const double> in, std::span<double> out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : in) {
    if (!std::isfinite(x)) throw NonFinite("softmax: non-finite parameter");
    m = std::max(m, x);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) z += (out[j] = std::exp(in[j] - m));
  for (double& x : out) x /= z;
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double x : v) z += std::exp(x - m);
  return m + std::log(z);
}

}  // namespace

FactoredPolicy softmax_policy(const SoftmaxParams& p) {
  FactoredPolicy fp;
  for (const Table& th : p.theta) {
    LocalPolicy pol(th.rows(), th.cols());
    for (int s = 0; s < th.rows(); ++s) softmax_row(th.row(s), pol.row(s));
    fp.agents.push_back(std::move(pol));
  }
  return fp;
}

EtaMode parse_eta_mode(const std::string& text) {
  if (text == "theorem") return EtaMode::kTheorem;
  if (text == "constant") return EtaMode::kConstant;
  if (text == "policy-space") return EtaMode::kPolicySpace;
  if (text == "experiment") return EtaMode::kExperiment;
  throw ValidationError("unknown eta mode '" + text + "'");
}

double Exploration::at(long k, long K) const {
  switch (kind) {
    case ExplorationKind::kNone:
      return 0.0;
    case ExplorationKind::kConstant:
      return epsilon;
    case ExplorationKind::kLinearDecay:
      return epsilon * (1.0 - static_cast<double>(k) / static_cast<double>(K));
  }
  return 0.0;
}

double eta_schedule(int t, double gamma, double joint_action_size, int n, std::span<const double> history) {
  const double log_a = std::log(joint_action_size);
  if (t == 0) return gamma * log_a;
  double sum = 0.0;
  for (int i = 0; i < t && i < static_cast<int>(history.size()); ++i) sum += history[i];
  // log form
  const double log_eta = std::log(2.0 * n * log_a) + std::log(sum) - std::log(1.0 - gamma) -
                         (2.0 * t - 1.0) * std::log(gamma);
  if (log_eta > std::log(std::numeric_limits<double>::max())) return std::numeric_limits<double>::infinity();
  return std::exp(log_eta);
}

double experiment_eta(int t, double gamma, double eta0, std::span<const double> history) {
  if (t == 0) return eta0;
  double sum = 0.0;
  for (int i = 0; i < t && i < static_cast<int>(history.size()); ++i) sum += history[i];
  const double log_eta = std::log(sum) - (2.0 * t - 1.0) * std::log(gamma);
  if (log_eta > std::log(std::numeric_limits<double>::max())) return std::numeric_limits<double>::infinity();
  return std::exp(log_eta);
}

SoftmaxParams inpg_step(const SoftmaxParams& theta, double eta, std::span<const LocalQTable> qs, bool log_space) {
  if (qs.size() != theta.theta.size()) throw DimensionMismatch("inpg_step: one Q table per agent expected");
  if (std::isnan(eta) || eta < 0.0) throw NonFinite("inpg_step: eta must be non-negative");
  SoftmaxParams out = theta;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    Table& th = out.theta[i];
    if (!th.same_shape(qs[i])) throw DimensionMismatch("inpg_step: shape mismatch");
    for (int s = 0; s < th.rows(); ++s) {
      auto row = th.row(s);
      auto q = qs[i].row(s);
      if (log_space && std::isinf(eta)) {
        const int best = argmax_lowest(q);
        for (int a = 0; a < th.cols(); ++a) row[a] = a == best ? 0.0 : kLogFloor;
        continue;
      }
      for (int a = 0; a < th.cols(); ++a) row[a] += eta * q[a];
      if (!log_space) {
        for (double x : row)
          if (!std::isfinite(x)) throw NonFinite("inpg_step: parameter overflow; use a log-space eta mode");
        continue;
      }
      const double lse = log_sum_exp(row);
      for (double& x : row) x = std::max(kLogFloor, x - lse);
      const double lse2 = log_sum_exp(row);
      for (double& x : row) x -= lse2;
    }
  }
  return out;
}

double npg_equivalence_check(const SoftmaxParams& theta, double eta, std::span<const LocalQTable> qs) {
  if (!std::isfinite(eta)) throw NonFinite("npg_equivalence_check: eta must be finite");
  const JointPolicy via_params = joint_policy_of(softmax_policy(inpg_step(theta, eta, qs)));

  const FactoredPolicy current = softmax_policy(theta);
  std::vector<int> ss, as;
  for (const auto& p : current.agents) {
    ss.push_back(p.rows());
    as.push_back(p.cols());
  }
  const IndexSpace states(ss), actions(as);
  const int n = static_cast<int>(qs.size());
  double worst = 0.0;
  std::vector<double> logits(actions.size());
  for (int s = 0; s < states.size(); ++s) {
    for (int a = 0; a < actions.size(); ++a) {
      double lp = 0.0, qsum = 0.0;
      for (int i = 0; i < n; ++i) {
        const int si = states.component(s, i), ai = actions.component(a, i);
        lp += std::log(current.agents[i](si, ai));
        qsum += qs[i](si, ai);
      }
      logits[a] = lp + eta * qsum;
    }
    const double lse = log_sum_exp(logits);
    for (int a = 0; a < actions.size(); ++a)
      worst = std::max(worst, std::abs(std::exp(logits[a] - lse) - via_params(s, a)));
  }
  return worst;
}

Trajectory start_trajectory(const FactoredMdp& mdp, std::uint64_t seed) {
  Trajectory tr;
  tr.env = RngStream::derive(seed, 0, kEnvStream);
  for (int i = 0; i < mdp.num_agents(); ++i) tr.agents.push_back(RngStream::derive(seed, 0, kAgentStreamBase + i));
  const auto starts = mdp.start_states();
  tr.state = starts[tr.env.below(starts.size())];
  return tr;
}

std::vector<LocalQTable> itd_steps(const FactoredMdp& mdp, const FactoredPolicy& pi, const ItdConfig& cfg,
                                   Trajectory& traj) {
  check_policy_shape(mdp, pi);
  if (cfg.K < 1) throw ValidationError("itd: K must be at least 1");
  if (!(cfg.alpha > 0.0) || !(cfg.k0 > 0.0)) throw ValidationError("itd: alpha and k0 must be positive");
  const int n = mdp.num_agents();
  const double gamma = mdp.gamma();
  std::vector<LocalQTable> q;
  for (int i = 0; i < n; ++i) q.emplace_back(mdp.states().size_of(i), mdp.actions().size_of(i));

  // Sampling policy must reach every local action.
  const double eps_min = std::min(cfg.explore.at(0, cfg.K), cfg.explore.at(cfg.K - 1, cfg.K));
  if (!(eps_min > 0.0)) check_exploration(mdp, pi);

  std::vector<int> la(n), ls(n);
  std::vector<double> mix;
  int s = traj.state;
  for (long k = 0; k < cfg.K; ++k) {
    const double eps = cfg.explore.at(k, cfg.K);
    for (int i = 0; i < n; ++i) {
      ls[i] = mdp.states().component(s, i);
      auto row = pi.agents[i].row(ls[i]);
      if (eps > 0.0) {
        mix.assign(row.begin(), row.end());
        for (double& x : mix) x = (1.0 - eps) * x + eps / static_cast<double>(mix.size());
        la[i] = static_cast<int>(traj.agents[i].categorical(mix));
      } else {
        la[i] = static_cast<int>(traj.agents[i].categorical(row));
      }
    }
    const int a = mdp.actions().compose(la);
    const int t = sample_transition(mdp, s, a, traj.env);
    const double step = cfg.alpha / (static_cast<double>(k) + cfg.k0);
    for (int i = 0; i < n; ++i) {
      const int ti = mdp.states().component(t, i);
      auto next_q = q[i].row(ti);
      auto next_pi = pi.agents[i].row(ti);
      double v = 0.0;
      for (std::size_t b = 0; b < next_q.size(); ++b) v += next_pi[b] * next_q[b];
      double& cur = q[i](ls[i], la[i]);
      cur += step * (mdp.realized_reward(i, s, a, t) + gamma * v - cur);
    }
    s = t;
    if (cfg.stride > 0 && cfg.on_snapshot && (k + 1) % cfg.stride == 0) cfg.on_snapshot(k + 1, q);
  }
  traj.state = s;
  return q;
}

std::vector<LocalQTable> itd_run(const FactoredMdp& mdp, const FactoredPolicy& pi, long K, double alpha, double k0,
                                 std::uint64_t seed) {
  Trajectory tr = start_trajectory(mdp, seed);
  ItdConfig cfg;
  cfg.K = K;
  cfg.alpha = alpha;
  cfg.k0 = k0;
  return itd_steps(mdp, pi, cfg, tr);
}

InacResult inac_run(const FactoredMdp& mdp, const InacConfig& cfg, const LearnerProbe& probe) {
  if (cfg.T < 0) throw ValidationError("inac: T must be non-negative");
  if (cfg.K < 1) throw ValidationError("inac: K must be at least 1");
  const double e0 = cfg.explore.at(0, cfg.K);
  if (e0 < 0.0 || e0 >= 1.0) throw ValidationError("inac: epsilon must lie in [0,1)");
  const int n = mdp.num_agents();
  const bool log_space = cfg.eta.mode == EtaMode::kPolicySpace || cfg.eta.mode == EtaMode::kExperiment;

  InacResult res;
  res.theta = zero_params(mdp);
  if (!cfg.critic) res.k0 = cfg.k0 ? *cfg.k0 : default_k0(mdp, uniform_factored_policy(mdp), cfg.alpha, cfg.K);
  Trajectory traj = start_trajectory(mdp, cfg.seed);

  auto record = [&](int t, const FactoredPolicy& pi) {
    for (const auto& [name, fn] : probe.scores) res.record.add(cfg.seed, "train", t, -1, name, fn(pi, t));
  };

  for (int t = 0; t < cfg.T; ++t) {
    const FactoredPolicy pi = softmax_policy(res.theta);
    record(t, pi);
    std::vector<LocalQTable> qs;
    if (cfg.critic) {
      qs = cfg.critic(pi);
    } else {
      ItdConfig ic;
      ic.K = cfg.K;
      ic.alpha = cfg.alpha;
      ic.k0 = res.k0;
      ic.explore = cfg.explore;
      std::vector<LocalQTable> ref;
      if (cfg.inner_stride > 0) {
        if (probe.critic_reference) ref = probe.critic_reference(pi);
        ic.stride = cfg.inner_stride;
        ic.on_snapshot = [&](long k, std::span<const LocalQTable> q) {
          const long step = static_cast<long>(t) * cfg.K + k;
          for (int i = 0; i < n; ++i) {
            res.inner.add(cfg.seed, "critic", step, i, "q_sup", sup_norm(q[i]));
            if (!ref.empty()) res.inner.add(cfg.seed, "critic", step, i, "critic_error", masked_error(q[i], ref[i]));
          }
        };
      }
      qs = itd_steps(mdp, pi, ic, traj);
      if (probe.critic_reference) {
        const auto r = ref.empty() ? probe.critic_reference(pi) : ref;
        for (int i = 0; i < n; ++i) res.record.add(cfg.seed, "train", t, i, "critic_error", masked_error(qs[i], r[i]));
      }
    }
    double eta = 0.0;
    switch (cfg.eta.mode) {
      case EtaMode::kTheorem:
      case EtaMode::kPolicySpace:
        eta = eta_schedule(t, mdp.gamma(), mdp.num_actions(), n, res.etas);
        break;
      case EtaMode::kConstant:
        eta = cfg.eta.value;
        break;
      case EtaMode::kExperiment:
        eta = experiment_eta(t, mdp.gamma(), cfg.eta.value, res.etas);
        break;
    }
    res.etas.push_back(eta);
    res.theta = inpg_step(res.theta, eta, qs, log_space);
  }
  res.policy = softmax_policy(res.theta);
  record(cfg.T, res.policy);
  return res;
}

}  // namespace ilab

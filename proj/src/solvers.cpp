#include "ilab/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "graph.hpp"

namespace ilab {

namespace {

// Successive-difference threshold; the second term stops iteration once the
// difference is at the level of rounding noise.
bool converged(double diff, double tol, double gamma, double scale) {
  const double thr = tol * (1.0 - gamma) / (2.0 * gamma);
  return diff <= thr || diff <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
}

// V(s') = max_a Q(s',a) for every s'.
std::vector<double> greedy_values(const Table& q) {
  std::vector<double> v(q.rows());
  for (int s = 0; s < q.rows(); ++s) {
    auto r = q.row(s);
    v[s] = *std::max_element(r.begin(), r.end());
  }
  return v;
}

std::vector<double> policy_values(const Table& q, const JointPolicy& pi) {
  std::vector<double> v(q.rows(), 0.0);
  for (int s = 0; s < q.rows(); ++s)
    for (int a = 0; a < q.cols(); ++a) v[s] += pi(s, a) * q(s, a);
  return v;
}

// out(s,a) = base(s,a) + γ Σ_s' P_a(s,s') v(s').
void backup(const FactoredMdp& mdp, const std::vector<double>& v, const Table& base, Table& out) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  const double g = mdp.gamma();
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      auto p = mdp.row(a, s);
      double acc = 0.0;
      for (int t = 0; t < S; ++t) acc += p[t] * v[t];
      out(s, a) = base(s, a) + g * acc;
    }
}

Table reward_table(const FactoredMdp& mdp, int agent) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  Table r(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) r(s, a) = agent < 0 ? mdp.expected_reward(s, a) : mdp.agent_reward(agent, s, a);
  return r;
}

Eigen::MatrixXd state_chain(const FactoredMdp& mdp, const JointPolicy& pi) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      auto p = mdp.row(a, s);
      for (int t = 0; t < S; ++t) P(s, t) += w * p[t];
    }
  return P;
}

QTable evaluate(const FactoredMdp& mdp, const JointPolicy& pi, const Table& R, double tol) {
  check_policy_shape(mdp, pi);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const double g = mdp.gamma();
  const Eigen::MatrixXd P = state_chain(mdp, pi);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) r(s) += pi(s, a) * R(s, a);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S) - g * P;
  const Eigen::VectorXd V = M.partialPivLu().solve(r);
  std::vector<double> v(V.data(), V.data() + S);
  QTable q(S, A);
  backup(mdp, v, R, q);

  QTable next(S, A);
  for (long it = 0; it < kIterationCap; ++it) {
    backup(mdp, policy_values(q, pi), R, next);
    const double diff = sup_norm_diff(next, q);
    std::swap(q, next);
    if (converged(diff, tol, g, sup_norm(q))) return q;
  }
  throw SolverError("policy_q: iteration cap exceeded");
}

}  // namespace

QTable value_iteration(const FactoredMdp& mdp, double tol, std::vector<double>* diffs) {
  if (!(tol > 0.0)) throw SolverError("value_iteration: tol must be positive");
  const int S = mdp.num_states(), A = mdp.num_actions();
  const Table R = reward_table(mdp, -1);
  QTable q(S, A), next(S, A);
  for (long it = 0; it < kIterationCap; ++it) {
    backup(mdp, greedy_values(q), R, next);
    const double diff = sup_norm_diff(next, q);
    if (diffs) diffs->push_back(diff);
    std::swap(q, next);
    if (converged(diff, tol, mdp.gamma(), sup_norm(q))) return q;
  }
  throw SolverError("value_iteration: iteration cap exceeded");
}

JointPolicy greedy_policy(const QTable& q) {
  JointPolicy pi(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) pi(s, argmax_lowest(q.row(s))) = 1.0;
  return pi;
}

QTable policy_q(const FactoredMdp& mdp, const JointPolicy& pi, double tol) {
  return evaluate(mdp, pi, reward_table(mdp, -1), tol);
}

QTable agent_policy_q(const FactoredMdp& mdp, int agent, const JointPolicy& pi, double tol) {
  if (agent < 0 || agent >= mdp.num_agents()) throw IndexError("agent_policy_q: bad agent");
  return evaluate(mdp, pi, reward_table(mdp, agent), tol);
}

double optimality_residual(const FactoredMdp& mdp, const QTable& q) {
  QTable next(q.rows(), q.cols());
  backup(mdp, greedy_values(q), reward_table(mdp, -1), next);
  return sup_norm_diff(next, q);
}

double evaluation_residual(const FactoredMdp& mdp, const JointPolicy& pi, const QTable& q) {
  QTable next(q.rows(), q.cols());
  backup(mdp, policy_values(q, pi), reward_table(mdp, -1), next);
  return sup_norm_diff(next, q);
}

namespace {

struct ChainAnalysis {
  std::vector<char> in_set;  // over pairs s*A+a
  std::vector<char> states;  // states carrying analyzed pairs
};

ChainAnalysis analyze_chain(const FactoredMdp& mdp, const JointPolicy& pi, const ChainOptions& opts) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  const int N = S * A;
  detail::Adjacency g(N);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      auto p = mdp.row(a, s);
      for (int t = 0; t < S; ++t) {
        if (p[t] <= 0.0) continue;
        for (int b = 0; b < A; ++b)
          if (pi(t, b) > 0.0) g[s * A + a].push_back(t * A + b);
      }
    }
  ChainAnalysis out;
  if (opts.start_states.empty()) {
    out.in_set.assign(N, 0);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) out.in_set[s * A + a] = pi(s, a) > 0.0;
  } else {
    std::vector<int> roots;
    for (int s : opts.start_states) {
      if (s < 0 || s >= S) throw IndexError("chain analysis: bad start state");
      for (int a = 0; a < A; ++a)
        if (pi(s, a) > 0.0) roots.push_back(s * A + a);
    }
    out.in_set = detail::reachable(g, roots);
  }
  // Induced subgraph must be a single strongly connected class.
  detail::Adjacency sub(N);
  int root = -1;
  for (int v = 0; v < N; ++v) {
    if (!out.in_set[v]) continue;
    if (root < 0) root = v;
    for (int w : g[v])
      if (out.in_set[w]) sub[v].push_back(w);
  }
  if (root < 0) throw ReducibleChain("chain analysis: empty analyzed set");
  const detail::Components c = detail::strongly_connected(sub);
  for (int v = 0; v < N; ++v)
    if (out.in_set[v] && c.comp[v] != c.comp[root])
      throw ReducibleChain("induced chain is not a single communicating class (pair s=" + std::to_string(v / A) +
                           ", a=" + std::to_string(v % A) + ")");
  const int p = detail::period(sub, out.in_set, root);
  if (p != 1) throw PeriodicChain("induced chain has period " + std::to_string(p));
  out.states.assign(S, 0);
  for (int v = 0; v < N; ++v)
    if (out.in_set[v]) out.states[v / A] = 1;
  return out;
}

// Stationary law of the state chain restricted to `states`.
Eigen::VectorXd stationary_states(const Eigen::MatrixXd& P, const std::vector<int>& idx) {
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd M(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) M(j, i) = P(idx[i], idx[j]) - (i == j ? 1.0 : 0.0);
  // Replace last equation with normalization.
  M.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  return M.fullPivLu().solve(rhs);
}

}  // namespace

StationaryDist stationary_distribution(const FactoredMdp& mdp, const JointPolicy& pi, double tol,
                                       const ChainOptions& opts) {
  check_policy_shape(mdp, pi);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const ChainAnalysis chain = analyze_chain(mdp, pi, opts);
  const Eigen::MatrixXd P = state_chain(mdp, pi);
  std::vector<int> idx;
  for (int s = 0; s < S; ++s)
    if (chain.states[s]) idx.push_back(s);
  const Eigen::VectorXd nu = stationary_states(P, idx);

  std::vector<double> mu(S, 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) mu[idx[k]] = std::max(0.0, nu(k));
  double z = std::accumulate(mu.begin(), mu.end(), 0.0);
  for (double& x : mu) x /= z;

  // Power iteration on the pair chain, factorized through the state marginal.
  Table d(S, A), next(S, A);
  auto pair_step = [&](const Table& in, Table& out) {
    std::vector<double> m(S, 0.0);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double w = in(s, a);
        if (w == 0.0) continue;
        auto p = mdp.row(a, s);
        for (int t = 0; t < S; ++t) m[t] += w * p[t];
      }
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) out(s, a) = m[s] * pi(s, a);
  };
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) d(s, a) = mu[s] * pi(s, a);
  for (long it = 0;; ++it) {
    pair_step(d, next);
    double l1 = 0.0;
    for (std::size_t k = 0; k < d.data().size(); ++k) l1 += std::abs(d.data()[k] - next.data()[k]);
    std::swap(d, next);
    if (l1 <= tol) break;
    if (it >= kIterationCap) throw SolverError("stationary_distribution: power iteration did not converge");
  }

  StationaryDist out;
  z = 0.0;
  for (double x : d.data()) z += x;
  for (double& x : d.data()) x /= z;
  out.d = std::move(d);
  out.sigma = *std::min_element(out.d.data().begin(), out.d.data().end());
  out.sigma_prime = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mdp.num_agents(); ++i) {
    Table m(mdp.states().size_of(i), mdp.actions().size_of(i));
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) m(mdp.states().component(s, i), mdp.actions().component(a, i)) += out.d(s, a);
    out.sigma_prime = std::min(out.sigma_prime, *std::min_element(m.data().begin(), m.data().end()));
    out.agent_marginals.push_back(std::move(m));
  }
  return out;
}

LocalQTable project_to_agent(const FactoredMdp& mdp, int agent, const Table& weights, const QTable& q,
                             ZeroMassCells zero) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  if (weights.rows() != S || weights.cols() != A || q.rows() != S || q.cols() != A)
    throw DimensionMismatch("project_to_agent: shape mismatch");
  const int Si = mdp.states().size_of(agent), Ai = mdp.actions().size_of(agent);
  LocalQTable num(Si, Ai), den(Si, Ai), plain(Si, Ai), count(Si, Ai);
  for (int s = 0; s < S; ++s) {
    const int si = mdp.states().component(s, agent);
    for (int a = 0; a < A; ++a) {
      const int ai = mdp.actions().component(a, agent);
      num(si, ai) += weights(s, a) * q(s, a);
      den(si, ai) += weights(s, a);
      plain(si, ai) += q(s, a);
      count(si, ai) += 1.0;
    }
  }
  LocalQTable x(Si, Ai);
  for (int si = 0; si < Si; ++si)
    for (int ai = 0; ai < Ai; ++ai) {
      if (den(si, ai) > 0.0) {
        x(si, ai) = num(si, ai) / den(si, ai);
      } else if (zero == ZeroMassCells::kUniformWeight) {
        x(si, ai) = plain(si, ai) / count(si, ai);
      } else {
        throw ZeroCellMass("agent " + std::to_string(agent) + " cell (" + std::to_string(si) + "," +
                           std::to_string(ai) + ") has zero weight");
      }
    }
  return x;
}

QTable lift_from_agent(const FactoredMdp& mdp, int agent, const LocalQTable& x) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  QTable q(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) q(s, a) = x(mdp.states().component(s, agent), mdp.actions().component(a, agent));
  return q;
}

QTable agent_bellman(const FactoredMdp& mdp, int agent, const OperatorKind& kind, const QTable& q) {
  const Table R = reward_table(mdp, agent);
  QTable out(q.rows(), q.cols());
  if (const auto* ev = std::get_if<Evaluation>(&kind))
    backup(mdp, policy_values(q, ev->policy), R, out);
  else
    backup(mdp, greedy_values(q), R, out);
  return out;
}

LocalQTable aggregated_fixed_point(const FactoredMdp& mdp, int agent, const StationaryDist& dist,
                                   const OperatorKind& kind, double tol, ZeroMassCells zero) {
  if (agent < 0 || agent >= mdp.num_agents()) throw IndexError("aggregated_fixed_point: bad agent");
  if (const auto* ev = std::get_if<Evaluation>(&kind)) check_policy_shape(mdp, ev->policy);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const Table R = reward_table(mdp, agent);
  const bool eval = std::holds_alternative<Evaluation>(kind);
  LocalQTable x(mdp.states().size_of(agent), mdp.actions().size_of(agent));
  QTable fq(S, A);
  for (long it = 0; it < kIterationCap; ++it) {
    const QTable q = lift_from_agent(mdp, agent, x);
    backup(mdp, eval ? policy_values(q, std::get<Evaluation>(kind).policy) : greedy_values(q), R, fq);
    LocalQTable next = project_to_agent(mdp, agent, dist.d, fq, zero);
    const double diff = sup_norm_diff(next, x);
    x = std::move(next);
    if (converged(diff, tol, mdp.gamma(), sup_norm(x))) return x;
  }
  throw SolverError("aggregated_fixed_point: iteration cap exceeded");
}

MixingProfile mixing_profile(const FactoredMdp& mdp, const JointPolicy& pi, int horizon, const ChainOptions& opts) {
  if (horizon < 1) throw SolverError("mixing_profile: horizon must be at least 1");
  const StationaryDist dist = stationary_distribution(mdp, pi, kDefaultTol, opts);
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<double> mu(S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) mu[s] += dist.d(s, a);
  const Eigen::MatrixXd P = state_chain(mdp, pi);

  std::vector<int> starts;
  for (int s = 0; s < S; ++s)
    if (mu[s] > 0.0 || opts.start_states.empty()) starts.push_back(s);
  // Rows: k-step state laws from each start.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<int>(starts.size()), S);
  for (std::size_t r = 0; r < starts.size(); ++r) L(static_cast<int>(r), starts[r]) = 1.0;

  MixingProfile out;
  out.sigma = dist.sigma;
  out.sigma_prime = dist.sigma_prime;
  for (int k = 0; k <= horizon; ++k) {
    double worst = 0.0;
    for (int r = 0; r < L.rows(); ++r) {
      double tv = 0.0;
      for (int s = 0; s < S; ++s) tv += std::abs(L(r, s) - mu[s]);
      worst = std::max(worst, 0.5 * tv);
    }
    out.decay_curve.push_back({k, worst});
    L = L * P;
  }

  constexpr double kGapFloor = 1e-12;
  std::vector<double> xs, ys;
  for (int k = 1; k <= horizon; ++k) {
    const double gap = out.decay_curve[k].second;
    if (gap > kGapFloor) {
      xs.push_back(k);
      ys.push_back(std::log(gap));
    }
  }
  const std::size_t half = xs.size() / 2;
  xs.erase(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(half));
  ys.erase(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(half));
  out.m2_hat = 1.0;
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      sxy += (xs[j] - mx) * (ys[j] - my);
      sxx += (xs[j] - mx) * (xs[j] - mx);
    }
    const double slope = sxy / sxx;
    out.m2_hat = slope < 0.0 ? std::max(1.0, -1.0 / slope) : std::max(1.0, static_cast<double>(horizon));
  } else if (xs.size() == 1 && xs[0] >= static_cast<double>(horizon)) {
    out.m2_hat = std::max(1.0, static_cast<double>(horizon));
  }
  // Envelope over k >= 1; the k = 0 gap is bounded by 1 regardless.
  out.m1_hat = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    const double gap = out.decay_curve[k].second;
    if (gap > kGapFloor) out.m1_hat = std::max(out.m1_hat, gap * std::exp(k / out.m2_hat));
  }
  return out;
}

double average_reward(const FactoredMdp& mdp, const JointPolicy& pi) {
  check_policy_shape(mdp, pi);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const Eigen::MatrixXd P = state_chain(mdp, pi);
  std::vector<double> r(S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) r[s] += pi(s, a) * mdp.expected_reward(s, a);

  detail::Adjacency g(S);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < S; ++t)
      if (P(s, t) > 0.0) g[s].push_back(t);
  const detail::Components c = detail::strongly_connected(g);
  std::vector<char> closed(c.count, 1);
  for (int s = 0; s < S; ++s)
    for (int t : g[s])
      if (c.comp[t] != c.comp[s]) closed[c.comp[s]] = 0;

  std::vector<double> mu0(S, 0.0);
  const auto starts = mdp.start_states();
  for (int s : starts) mu0[s] = 1.0 / starts.size();

  std::vector<int> transient;
  std::vector<int> pos(S, -1);
  for (int s = 0; s < S; ++s)
    if (!closed[c.comp[s]]) {
      pos[s] = static_cast<int>(transient.size());
      transient.push_back(s);
    }
  // Expected visits y = mu0_T (I - P_TT)^{-1}; mass entering closed class C is
  // mu0(C) + Σ_t y_t P(t, C).
  std::vector<double> enter(c.count, 0.0);
  for (int s = 0; s < S; ++s)
    if (closed[c.comp[s]]) enter[c.comp[s]] += mu0[s];
  if (!transient.empty()) {
    const int m = static_cast<int>(transient.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      b(i) = mu0[transient[i]];
      for (int j = 0; j < m; ++j) M(j, i) -= P(transient[i], transient[j]);
    }
    const Eigen::VectorXd y = M.fullPivLu().solve(b);
    for (int i = 0; i < m; ++i)
      for (int t = 0; t < S; ++t)
        if (closed[c.comp[t]]) enter[c.comp[t]] += y(i) * P(transient[i], t);
  }

  double g_total = 0.0;
  for (int k = 0; k < c.count; ++k) {
    if (!closed[k] || enter[k] <= 0.0) continue;
    std::vector<int> idx;
    for (int s = 0; s < S; ++s)
      if (c.comp[s] == k) idx.push_back(s);
    const Eigen::VectorXd nu = stationary_states(P, idx);
    double gk = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) gk += nu(static_cast<int>(j)) * r[idx[j]];
    g_total += enter[k] * gk;
  }
  return g_total;
}

}  // namespace ilab

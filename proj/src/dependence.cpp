#include "ilab/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "lp.hpp"

namespace ilab {

SeparableKernel::SeparableKernel(std::vector<int> state_sizes, std::vector<int> action_sizes)
    : state_sizes_(std::move(state_sizes)), action_sizes_(std::move(action_sizes)) {
  if (state_sizes_.size() != action_sizes_.size()) throw DimensionMismatch("SeparableKernel: agent count mismatch");
  for (std::size_t i = 0; i < state_sizes_.size(); ++i)
    data_.emplace_back(static_cast<std::size_t>(action_sizes_[i]) * state_sizes_[i] * state_sizes_[i], 0.0);
}

long SeparableKernel::parameter_count() const {
  long total = 0;
  for (int i = 0; i < num_agents(); ++i) total += static_cast<long>(action_sizes_[i]) * state_sizes_[i] * state_sizes_[i];
  return total;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DimensionMismatch("tv_distance: sizes " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  double sp = 0.0, sq = 0.0, l1 = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0) || !(q[j] >= 0.0)) throw NotADistribution("tv_distance: negative or non-finite entry");
    sp += p[j];
    sq += q[j];
    l1 += std::abs(p[j] - q[j]);
  }
  if (std::abs(sp - 1.0) > 1e-10 || std::abs(sq - 1.0) > 1e-10)
    throw NotADistribution("tv_distance: input does not sum to 1");
  return 0.5 * l1;
}

void product_row(const SeparableKernel& k, const IndexSpace& states, const IndexSpace& actions, int s, int a,
                 std::vector<double>& out) {
  const int n = states.rank();
  out.assign(1, 1.0);
  for (int i = 0; i < n; ++i) {
    auto r = k.row(i, actions.component(a, i), states.component(s, i));
    std::vector<double> next(out.size() * r.size());
    for (std::size_t u = 0; u < out.size(); ++u)
      for (std::size_t v = 0; v < r.size(); ++v) next[u * r.size() + v] = out[u] * r[v];
    out.swap(next);
  }
}

void check_kernel(const FactoredMdp& mdp, const SeparableKernel& k) {
  if (k.num_agents() != mdp.num_agents()) throw DimensionMismatch("kernel agent count differs from mdp");
  for (int i = 0; i < k.num_agents(); ++i) {
    if (k.state_sizes()[i] != mdp.states().size_of(i) || k.action_sizes()[i] != mdp.actions().size_of(i))
      throw DimensionMismatch("kernel shape differs from mdp for agent " + std::to_string(i));
    for (int a = 0; a < k.action_sizes()[i]; ++a)
      for (int s = 0; s < k.state_sizes()[i]; ++s) {
        double sum = 0.0;
        for (double x : k.row(i, a, s)) {
          if (!(x >= 0.0 && x <= 1.0)) throw NotADistribution("kernel entry outside [0,1]");
          sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-10) throw NotADistribution("kernel row does not sum to 1");
      }
  }
}

namespace {

double tv_raw(std::span<const double> p, std::span<const double> q) {
  double l1 = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) l1 += std::abs(p[j] - q[j]);
  return 0.5 * l1;
}

double objective(const FactoredMdp& mdp, const SeparableKernel& k) {
  std::vector<double> row;
  double worst = 0.0;
  for (int a = 0; a < mdp.num_actions(); ++a)
    for (int s = 0; s < mdp.num_states(); ++s) {
      product_row(k, mdp.states(), mdp.actions(), s, a, row);
      worst = std::max(worst, tv_raw(mdp.row(a, s), row));
    }
  return worst;
}

// Joint pairs (s,a) whose agent-i coordinates equal (si, ai).
std::vector<std::pair<int, int>> row_members(const FactoredMdp& mdp, int agent, int si, int ai) {
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.states().component(s, agent) != si) continue;
    for (int a = 0; a < mdp.num_actions(); ++a)
      if (mdp.actions().component(a, agent) == ai) out.push_back({s, a});
  }
  return out;
}

// One member of a row group: true row p and the frozen other-agent factor r
// over joint next states; the candidate row q enters as q[t^i] * r[t].
struct Member {
  std::span<const double> p;
  std::vector<double> r;
};

std::vector<double> other_factor(const FactoredMdp& mdp, const SeparableKernel& k, int agent, int s, int a) {
  const int S = mdp.num_states();
  std::vector<double> r(S, 1.0);
  for (int t = 0; t < S; ++t)
    for (int j = 0; j < mdp.num_agents(); ++j) {
      if (j == agent) continue;
      r[t] *= k.row(j, mdp.actions().component(a, j), mdp.states().component(s, j))[mdp.states().component(t, j)];
    }
  return r;
}

double group_value(const FactoredMdp& mdp, int agent, const std::vector<Member>& members, std::span<const double> q) {
  double worst = 0.0;
  for (const Member& m : members) {
    double l1 = 0.0;
    for (std::size_t t = 0; t < m.p.size(); ++t)
      l1 += std::abs(m.p[t] - q[mdp.states().component(static_cast<int>(t), agent)] * m.r[t]);
    worst = std::max(worst, 0.5 * l1);
  }
  return worst;
}

void normalize(std::vector<double>& q) {
  for (double& x : q) x = std::max(0.0, x);
  const double z = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& x : q) x /= z;
}

// min_q max_j Σ_t (p_jt - q[t^i] r_jt)^+ (= max_j TV for distributions).
std::optional<std::vector<double>> solve_group_lp(const FactoredMdp& mdp, int agent,
                                                  const std::vector<Member>& members, int m) {
  struct Term {
    int member;
    int t;
  };
  std::vector<Term> terms;
  std::vector<double> constant(members.size(), 0.0);
  for (std::size_t j = 0; j < members.size(); ++j)
    for (std::size_t t = 0; t < members[j].p.size(); ++t) {
      if (members[j].p[t] <= 0.0) continue;
      if (members[j].r[t] <= 0.0)
        constant[j] += members[j].p[t];
      else
        terms.push_back({static_cast<int>(j), static_cast<int>(t)});
    }
  const std::size_t rows = terms.size() + members.size() + 1;
  const std::size_t vars = m + 1 + terms.size();
  if (rows * (vars + rows * 2) > 40'000'000) return std::nullopt;

  detail::LinearProgram lp;
  lp.num_vars = static_cast<int>(vars);
  lp.c.assign(vars, 0.0);
  lp.c[m] = 1.0;  // τ
  for (std::size_t e = 0; e < terms.size(); ++e) {
    const Member& mem = members[terms[e].member];
    std::vector<double> row(vars, 0.0);
    row[m + 1 + e] = -1.0;
    row[mdp.states().component(terms[e].t, agent)] = -mem.r[terms[e].t];
    lp.a_ub.push_back(std::move(row));
    lp.b_ub.push_back(-mem.p[terms[e].t]);
  }
  for (std::size_t j = 0; j < members.size(); ++j) {
    std::vector<double> row(vars, 0.0);
    row[m] = -1.0;
    for (std::size_t e = 0; e < terms.size(); ++e)
      if (terms[e].member == static_cast<int>(j)) row[m + 1 + e] = 1.0;
    lp.a_ub.push_back(std::move(row));
    lp.b_ub.push_back(-constant[j]);
  }
  std::vector<double> eq(vars, 0.0);
  for (int k = 0; k < m; ++k) eq[k] = 1.0;
  lp.a_eq.push_back(std::move(eq));
  lp.b_eq.push_back(1.0);
  const detail::LpSolution sol = detail::solve_lp(lp);
  if (!sol.optimal) return std::nullopt;
  std::vector<double> q(sol.x.begin(), sol.x.begin() + m);
  normalize(q);
  return q;
}

void project_simplex(std::vector<double>& v) {
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

// Projected subgradient with step c/sqrt(t); used when the LP is too large.
std::vector<double> solve_group_subgradient(const FactoredMdp& mdp, int agent, const std::vector<Member>& members,
                                            std::span<const double> start) {
  std::vector<double> q(start.begin(), start.end()), best(q), g(q.size());
  double best_val = group_value(mdp, agent, members, q);
  constexpr int kIters = 500;
  constexpr double kStep = 0.5;
  for (int it = 1; it <= kIters; ++it) {
    std::size_t worst = 0;
    double wv = -1.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double v = group_value(mdp, agent, {members[j]}, q);
      if (v > wv) {
        wv = v;
        worst = j;
      }
    }
    std::fill(g.begin(), g.end(), 0.0);
    const Member& mm = members[worst];
    for (std::size_t t = 0; t < mm.p.size(); ++t) {
      const int k = mdp.states().component(static_cast<int>(t), agent);
      const double diff = mm.p[t] - q[k] * mm.r[t];
      g[k] += 0.5 * (diff > 0 ? -mm.r[t] : (diff < 0 ? mm.r[t] : 0.0));
    }
    for (std::size_t k = 0; k < q.size(); ++k) q[k] -= kStep / std::sqrt(static_cast<double>(it)) * g[k];
    project_simplex(q);
    const double v = group_value(mdp, agent, members, q);
    if (v < best_val) {
      best_val = v;
      best = q;
    }
  }
  return best;
}

// One pass of block minimization over every agent's rows.
void descend_pass(const FactoredMdp& mdp, SeparableKernel& k) {
  for (int i = 0; i < mdp.num_agents(); ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        std::vector<Member> members;
        for (auto [s, a] : row_members(mdp, i, si, ai)) members.push_back({mdp.row(a, s), other_factor(mdp, k, i, s, a)});
        auto cur = k.row(i, ai, si);
        const double current = group_value(mdp, i, members, cur);
        std::optional<std::vector<double>> q = solve_group_lp(mdp, i, members, Si);
        if (!q) q = solve_group_subgradient(mdp, i, members, cur);
        if (group_value(mdp, i, members, *q) < current) std::copy(q->begin(), q->end(), cur.begin());
      }
  }
}

// Joint trust-region polish: linearize the product kernel around k and solve
// min τ s.t. Σ_t (p_t - lin_t)^+ ≤ τ for every (s,a), all rows moving together.
constexpr double kPolishTableauCap = 2e5;

bool polish_fits(const FactoredMdp& mdp) {
  const int n = mdp.num_agents(), S = mdp.num_states(), A = mdp.num_actions();
  std::size_t params = 0;
  for (int i = 0; i < n; ++i)
    params += static_cast<std::size_t>(mdp.actions().size_of(i)) * mdp.states().size_of(i) * mdp.states().size_of(i);
  const std::size_t terms = static_cast<std::size_t>(S) * A * S;
  const std::size_t rows = terms + static_cast<std::size_t>(S) * A + 2 * params;
  const std::size_t vars = params + 1 + terms;
  return static_cast<double>(rows) * static_cast<double>(vars + 2 * rows) <= kPolishTableauCap;
}

bool polish_step(const FactoredMdp& mdp, SeparableKernel& k, double radius, double& value) {
  const int n = mdp.num_agents(), S = mdp.num_states(), A = mdp.num_actions();
  std::vector<std::size_t> offset(n + 1, 0);
  for (int i = 0; i < n; ++i) offset[i + 1] = offset[i] + k.agent_data(i).size();
  const std::size_t P = offset[n];
  auto var_of = [&](int i, int ai, int si, int ti) {
    const int Si = mdp.states().size_of(i);
    return offset[i] + (static_cast<std::size_t>(ai) * Si + si) * Si + ti;
  };
  std::vector<double> lo(P), hi(P);
  for (int i = 0; i < n; ++i) {
    const auto d = k.agent_data(i);
    for (std::size_t e = 0; e < d.size(); ++e) {
      lo[offset[i] + e] = std::max(0.0, d[e] - radius);
      hi[offset[i] + e] = std::min(1.0, d[e] + radius);
    }
  }
  const std::size_t terms = static_cast<std::size_t>(S) * A * S;
  const std::size_t vars = P + 1 + terms;
  detail::LinearProgram lp;
  lp.num_vars = static_cast<int>(vars);
  lp.c.assign(vars, 0.0);
  lp.c[P] = 1.0;
  std::vector<double> prod;
  std::size_t u = P + 1;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      product_row(k, mdp.states(), mdp.actions(), s, a, prod);
      const auto p = mdp.row(a, s);
      std::vector<double> sum_row(vars, 0.0);
      sum_row[P] = -1.0;
      for (int t = 0; t < S; ++t, ++u) {
        // lin_t = Σ_i c_i x_i - (n-1) prod_t, x_i = lo_i + y_i.
        std::vector<double> row(vars, 0.0);
        row[u] = -1.0;
        double rhs = -p[t] - (n - 1) * prod[t];
        for (int i = 0; i < n; ++i) {
          const int si = mdp.states().component(s, i), ai = mdp.actions().component(a, i);
          const int ti = mdp.states().component(t, i);
          double c = 1.0;
          for (int j = 0; j < n; ++j)
            if (j != i) c *= k.row(j, mdp.actions().component(a, j), mdp.states().component(s, j))[mdp.states().component(t, j)];
          const std::size_t v = var_of(i, ai, si, ti);
          row[v] -= c;
          rhs += c * lo[v];
        }
        lp.a_ub.push_back(std::move(row));
        lp.b_ub.push_back(rhs);
        sum_row[u] = 1.0;
      }
      lp.a_ub.push_back(std::move(sum_row));
      lp.b_ub.push_back(0.0);
    }
  for (std::size_t v = 0; v < P; ++v) {
    std::vector<double> row(vars, 0.0);
    row[v] = 1.0;
    lp.a_ub.push_back(std::move(row));
    lp.b_ub.push_back(hi[v] - lo[v]);
  }
  for (int i = 0; i < n; ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        std::vector<double> row(vars, 0.0);
        double rhs = 1.0;
        for (int ti = 0; ti < Si; ++ti) {
          row[var_of(i, ai, si, ti)] = 1.0;
          rhs -= lo[var_of(i, ai, si, ti)];
        }
        lp.a_eq.push_back(std::move(row));
        lp.b_eq.push_back(rhs);
      }
  }
  const detail::LpSolution sol = detail::solve_lp(lp);
  if (!sol.optimal) return false;
  SeparableKernel cand = k;
  for (int i = 0; i < n; ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        std::vector<double> q(Si);
        for (int ti = 0; ti < Si; ++ti) q[ti] = lo[var_of(i, ai, si, ti)] + sol.x[var_of(i, ai, si, ti)];
        normalize(q);
        std::copy(q.begin(), q.end(), cand.row(i, ai, si).begin());
      }
  }
  const double next = objective(mdp, cand);
  if (next < value - 1e-13) {
    k = std::move(cand);
    value = next;
    return true;
  }
  return false;
}

void polish(const FactoredMdp& mdp, SeparableKernel& k, double& value) {
  double radius = 0.05;
  for (int it = 0; it < 60 && radius > 1e-9 && value > 1e-12; ++it) {
    if (polish_step(mdp, k, radius, value))
      radius = std::min(0.25, radius * 2.0);
    else
      radius *= 0.25;
  }
}

}  // namespace

double max_tv_gap(const FactoredMdp& mdp, const SeparableKernel& k) {
  check_kernel(mdp, k);
  return objective(mdp, k);
}

SeparableKernel uniform_kernel(const FactoredMdp& mdp) {
  const auto ss = mdp.states().sizes();
  const auto as = mdp.actions().sizes();
  SeparableKernel k({ss.begin(), ss.end()}, {as.begin(), as.end()});
  for (int i = 0; i < k.num_agents(); ++i) std::fill(k.agent_data(i).begin(), k.agent_data(i).end(), 1.0 / ss[i]);
  return k;
}

SeparableKernel marginal_kernel(const FactoredMdp& mdp) {
  SeparableKernel k = uniform_kernel(mdp);
  for (int i = 0; i < mdp.num_agents(); ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        const auto members = row_members(mdp, i, si, ai);
        auto out = k.row(i, ai, si);
        std::fill(out.begin(), out.end(), 0.0);
        for (auto [s, a] : members) {
          auto p = mdp.row(a, s);
          for (int t = 0; t < mdp.num_states(); ++t) out[mdp.states().component(t, i)] += p[t];
        }
        double z = 0.0;
        for (double x : out) z += x;
        for (double& x : out) x /= z;
      }
  }
  return k;
}

SeparableKernel random_kernel(const FactoredMdp& mdp, RngStream& rng) {
  SeparableKernel k = uniform_kernel(mdp);
  for (int i = 0; i < mdp.num_agents(); ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        auto r = k.row(i, ai, si);
        double z = 0.0;
        for (double& x : r) z += (x = rng.exponential());
        for (double& x : r) x /= z;
      }
  }
  return k;
}

DependenceEstimate optimize_dependence(const FactoredMdp& mdp, const DependenceConfig& cfg) {
  const int total = 2 + std::max(0, cfg.starts);
  std::vector<SeparableKernel> kernels(total);
  std::vector<double> values(total, 1.0);
  const bool polish_on = polish_fits(mdp);
  auto run_start = [&](int idx) {
    SeparableKernel k;
    if (idx == 0) {
      k = uniform_kernel(mdp);
    } else if (idx == 1) {
      k = marginal_kernel(mdp);
    } else {
      RngStream rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(idx), 0);
      k = random_kernel(mdp, rng);
    }
    double value = objective(mdp, k);
    for (int pass = 0; pass < cfg.passes; ++pass) {
      descend_pass(mdp, k);
      const double next = objective(mdp, k);
      const bool stalled = next > value - 1e-13;
      value = std::min(value, next);
      if (stalled) break;
    }
    kernels[idx] = std::move(k);
    values[idx] = value;
  };
  const int threads = std::max(1, std::min(cfg.threads, total));
  if (threads == 1) {
    for (int idx = 0; idx < total; ++idx) run_start(idx);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (int idx = w; idx < total; idx += threads) run_start(idx);
      });
    for (auto& t : pool) t.join();
  }
  int best = 0;
  for (int idx = 1; idx < total; ++idx)
    if (values[idx] < values[best]) best = idx;

  if (polish_on) polish(mdp, kernels[best], values[best]);

  DependenceEstimate out;
  out.value = values[best];
  out.kernel = std::move(kernels[best]);
  out.best_start = best;
  out.method = polish_on ? "coordinate-descent+joint-lp" : "coordinate-descent";
  if (cfg.lower_bound) out.certified_lower = std::min(out.value, marginal_lower_bound(mdp));
  return out;
}

double marginal_lower_bound(const FactoredMdp& mdp) {
  double bound = 0.0;
  const int S = mdp.num_states();
  for (int i = 0; i < mdp.num_agents(); ++i) {
    const int Si = mdp.states().size_of(i), Ai = mdp.actions().size_of(i);
    // Single-agent view of the marginals: reuse the group LP with r ≡ 1 on
    // the local next-state coordinates.
    std::vector<int> sizes{Si};
    for (int ai = 0; ai < Ai; ++ai)
      for (int si = 0; si < Si; ++si) {
        std::vector<std::vector<double>> marg;
        for (auto [s, a] : row_members(mdp, i, si, ai)) {
          std::vector<double> m(Si, 0.0);
          auto p = mdp.row(a, s);
          for (int t = 0; t < S; ++t) m[mdp.states().component(t, i)] += p[t];
          marg.push_back(std::move(m));
        }
        // min_q max_j Σ_k (m_jk - q_k)^+.
        const std::size_t J = marg.size();
        std::vector<std::pair<int, int>> terms;
        for (std::size_t j = 0; j < J; ++j)
          for (int kk = 0; kk < Si; ++kk)
            if (marg[j][kk] > 0.0) terms.push_back({static_cast<int>(j), kk});
        detail::LinearProgram lp;
        const std::size_t vars = Si + 1 + terms.size();
        lp.num_vars = static_cast<int>(vars);
        lp.c.assign(vars, 0.0);
        lp.c[Si] = 1.0;
        for (std::size_t e = 0; e < terms.size(); ++e) {
          std::vector<double> row(vars, 0.0);
          row[Si + 1 + e] = -1.0;
          row[terms[e].second] = -1.0;
          lp.a_ub.push_back(std::move(row));
          lp.b_ub.push_back(-marg[terms[e].first][terms[e].second]);
        }
        for (std::size_t j = 0; j < J; ++j) {
          std::vector<double> row(vars, 0.0);
          row[Si] = -1.0;
          for (std::size_t e = 0; e < terms.size(); ++e)
            if (terms[e].first == static_cast<int>(j)) row[Si + 1 + e] = 1.0;
          lp.a_ub.push_back(std::move(row));
          lp.b_ub.push_back(0.0);
        }
        std::vector<double> eq(vars, 0.0);
        for (int kk = 0; kk < Si; ++kk) eq[kk] = 1.0;
        lp.a_eq.push_back(std::move(eq));
        lp.b_eq.push_back(1.0);
        const detail::LpSolution sol = detail::solve_lp(lp);
        if (!sol.optimal) continue;
        // Re-evaluate exactly at the returned q for a value that does not
        // depend on simplex round-off, then keep the LP optimum if smaller.
        std::vector<double> q(sol.x.begin(), sol.x.begin() + Si);
        normalize(q);
        double at_q = 0.0;
        for (const auto& m : marg) at_q = std::max(at_q, tv_raw(m, q));
        bound = std::max(bound, std::max(0.0, std::min(at_q, sol.objective) - 1e-12));
      }
  }
  return bound;
}

namespace {

// All points of the simplex in R^m with coordinates in (1/N)Z.
std::vector<std::vector<double>> simplex_grid(int m, int N) {
  std::vector<std::vector<double>> out;
  std::vector<int> c(m, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m - 1) {
      c[pos] = left;
      std::vector<double> v(m);
      for (int j = 0; j < m; ++j) v[j] = static_cast<double>(c[j]) / N;
      out.push_back(std::move(v));
      return;
    }
    for (int x = left; x >= 0; --x) {
      c[pos] = x;
      rec(pos + 1, left - x);
    }
  };
  rec(0, N);
  return out;
}

}  // namespace

DependenceBracket brute_force_dependence(const FactoredMdp& mdp, int resolution) {
  if (resolution < 1) throw TooLarge("brute_force_dependence: resolution must be positive");
  const int n = mdp.num_agents();
  long free_params = 0;
  for (int i = 0; i < n; ++i)
    free_params += static_cast<long>(mdp.actions().size_of(i)) * mdp.states().size_of(i) * (mdp.states().size_of(i) - 1);
  if (free_params > kBruteForceParameterCap)
    throw TooLarge("brute_force_dependence: " + std::to_string(free_params) + " free kernel parameters exceed cap " +
                   std::to_string(kBruteForceParameterCap));

  std::vector<std::vector<std::vector<double>>> grids(n);
  for (int i = 0; i < n; ++i) grids[i] = simplex_grid(mdp.states().size_of(i), resolution);

  // Outer odometer over every row of agents 0..n-2; the last agent's rows
  // decouple given the others and are minimized one at a time.
  struct Slot {
    int agent, a, s;
  };
  std::vector<Slot> slots;
  for (int i = 0; i + 1 < n; ++i)
    for (int a = 0; a < mdp.actions().size_of(i); ++a)
      for (int s = 0; s < mdp.states().size_of(i); ++s) slots.push_back({i, a, s});
  const int last = n - 1;
  const int Sl = mdp.states().size_of(last), Al = mdp.actions().size_of(last);

  double combos = 1.0;
  for (const Slot& sl : slots) combos *= static_cast<double>(grids[sl.agent].size());
  const double inner = static_cast<double>(grids[last].size()) * mdp.num_states() * mdp.num_actions() *
                       mdp.num_states();
  if (combos * inner > 2e9)
    throw TooLarge("brute_force_dependence: grid too large (" + std::to_string(combos * inner) + " operations)");

  SeparableKernel k = uniform_kernel(mdp);
  std::vector<std::size_t> odo(slots.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  SeparableKernel best_k = k;
  std::vector<std::vector<std::pair<int, int>>> last_members;
  for (int a = 0; a < Al; ++a)
    for (int s = 0; s < Sl; ++s) last_members.push_back(row_members(mdp, last, s, a));

  while (true) {
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const auto& g = grids[slots[j].agent][odo[j]];
      auto r = k.row(slots[j].agent, slots[j].a, slots[j].s);
      std::copy(g.begin(), g.end(), r.begin());
    }
    double value = 0.0;
    std::size_t row_id = 0;
    for (int a = 0; a < Al && value < best; ++a)
      for (int s = 0; s < Sl; ++s, ++row_id) {
        std::vector<Member> members;
        for (auto [js, ja] : last_members[row_id]) members.push_back({mdp.row(ja, js), other_factor(mdp, k, last, js, ja)});
        double row_best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < grids[last].size(); ++c) {
          const double v = group_value(mdp, last, members, grids[last][c]);
          if (v < row_best) {
            row_best = v;
            arg = c;
          }
        }
        auto r = k.row(last, a, s);
        std::copy(grids[last][arg].begin(), grids[last][arg].end(), r.begin());
        value = std::max(value, row_best);
      }
    if (value < best) {
      best = value;
      best_k = k;
    }
    std::size_t j = 0;
    while (j < odo.size() && ++odo[j] == grids[slots[j].agent].size()) odo[j++] = 0;
    if (j == odo.size()) break;
  }

  // Any kernel is within L1 distance |S^i|/N per row of a grid kernel, and
  // ‖⊗p_i - ⊗q_i‖₁ ≤ Σ‖p_i - q_i‖₁, so the grid optimum exceeds E by at
  // most ½ Σ_i |S^i| / N.
  double slack = 0.0;
  for (int i = 0; i < n; ++i) slack += 0.5 * mdp.states().size_of(i) / resolution;
  DependenceBracket out;
  out.upper = best;
  out.lower = std::max(0.0, best - slack);
  out.kernel = std::move(best_k);
  return out;
}

FactoredMdp build_separable_mdp(const FactoredMdp& mdp, const SeparableKernel& k) {
  check_kernel(mdp, k);
  MdpSpec spec = mdp.spec();
  const std::size_t S = mdp.num_states();
  std::vector<double> row;
  for (int a = 0; a < mdp.num_actions(); ++a)
    for (int s = 0; s < mdp.num_states(); ++s) {
      product_row(k, mdp.states(), mdp.actions(), s, a, row);
      std::copy(row.begin(), row.end(), spec.transition.begin() + (a * S + s) * S);
    }
  return FactoredMdp(std::move(spec));
}

FactoredMdp local_mdp(const FactoredMdp& mdp, const SeparableKernel& k, int agent) {
  check_kernel(mdp, k);
  if (agent < 0 || agent >= mdp.num_agents()) throw IndexError("local_mdp: bad agent");
  MdpSpec spec;
  spec.local_state_sizes = {mdp.states().size_of(agent)};
  spec.local_action_sizes = {mdp.actions().size_of(agent)};
  spec.gamma = mdp.gamma();
  spec.transition = k.agent_data(agent);
  spec.rewards = {mdp.local_reward(agent)};
  spec.reward_bounds = {mdp.reward_bound(agent)};
  std::vector<char> seen(mdp.states().size_of(agent), 0);
  if (!mdp.spec().start_states.empty()) {
    for (int s : mdp.start_states()) seen[mdp.states().component(s, agent)] = 1;
    for (int si = 0; si < static_cast<int>(seen.size()); ++si)
      if (seen[si]) spec.start_states.push_back(si);
  }
  return FactoredMdp(std::move(spec));
}

}  // namespace ilab

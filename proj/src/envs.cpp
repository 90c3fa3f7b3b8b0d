#include "ilab/envs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>

namespace ilab {

void check_grouping(const Grouping& g, int n) {
  std::vector<int> hit(n, 0);
  for (const auto& grp : g.groups) {
    if (grp.empty()) throw InvalidPartition("empty group");
    for (int j : grp) {
      if (j < 0 || j >= n) throw InvalidPartition("agent " + std::to_string(j + 1) + " out of range");
      if (hit[j]++) throw InvalidPartition("agent " + std::to_string(j + 1) + " appears twice");
    }
  }
  for (int j = 0; j < n; ++j)
    if (!hit[j]) throw InvalidPartition("agent " + std::to_string(j + 1) + " not covered");
}

Grouping parse_grouping(std::string_view text, int n) {
  Grouping g;
  const bool explicit_form = text.find_first_of(",;") != std::string_view::npos;
  if (!explicit_form) {
    std::vector<int> pair;
    for (char c : text) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw InvalidPartition("bad grouping '" + std::string(text) + "'");
      pair.push_back(c - '1');
    }
    std::set<int> in_pair(pair.begin(), pair.end());
    std::vector<std::vector<int>> groups;
    if (!pair.empty()) groups.push_back(pair);
    for (int j = 0; j < n; ++j)
      if (!in_pair.count(j)) groups.push_back({j});
    std::stable_sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) {
      return *std::min_element(x.begin(), x.end()) < *std::min_element(y.begin(), y.end());
    });
    g.groups = std::move(groups);
  } else {
    std::vector<int> cur;
    std::string num;
    auto flush_num = [&] {
      if (num.empty()) throw InvalidPartition("bad grouping '" + std::string(text) + "'");
      cur.push_back(std::stoi(num) - 1);
      num.clear();
    };
    for (char c : text) {
      if (std::isdigit(static_cast<unsigned char>(c))) {
        num += c;
      } else if (c == ',') {
        flush_num();
      } else if (c == ';') {
        flush_num();
        g.groups.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        throw InvalidPartition("bad grouping '" + std::string(text) + "'");
      }
    }
    flush_num();
    g.groups.push_back(cur);
  }
  check_grouping(g, n);
  return g;
}

FactoredMdp synthetic3(double gamma) {
  MdpSpec spec;
  spec.local_state_sizes = {2, 2, 2};
  spec.local_action_sizes = {2, 2, 2};
  spec.gamma = gamma;
  const IndexSpace sp({2, 2, 2});
  const int S = 8, A = 8;
  spec.transition.assign(static_cast<std::size_t>(A) * S * S, 0.0);
  for (int a = 0; a < A; ++a) {
    const auto act = sp.decompose(a);
    for (int s = 0; s < S; ++s) {
      const auto st = sp.decompose(s);
      int n1, n2;
      if (st[0] == st[1]) {
        n1 = act[0] == act[1] ? st[0] : 1 - st[0];
        n2 = n1;
      } else {
        n1 = n2 = 0;
      }
      double p3[2];
      if (st[2] == 0 && act[1] != act[2]) {
        p3[0] = 0.0;
        p3[1] = 1.0;
      } else {
        p3[0] = p3[1] = 0.5;
      }
      for (int b = 0; b < 2; ++b) {
        const int t = sp.compose(std::vector<int>{n1, n2, b});
        spec.transition[(static_cast<std::size_t>(a) * S + s) * S + t] = p3[b];
      }
    }
  }
  for (int i = 0; i < 3; ++i) {
    std::vector<double> r(8, 0.0);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) r[(s * 2 + a) * 2 + s] = 1.0;
    spec.rewards.push_back(LocalReward::transition(2, 2, std::move(r)));
  }
  for (int s = 0; s < S; ++s) {
    const auto st = sp.decompose(s);
    if (st[0] == st[1]) spec.start_states.push_back(s);
  }
  return FactoredMdp(std::move(spec));
}

namespace {

int regroup(const IndexSpace& space, const Grouping& g, int joint) {
  const auto locals = space.decompose(joint);
  int out = 0;
  for (const auto& grp : g.groups)
    for (int j : grp) out = out * space.size_of(j) + locals[j];
  return out;
}

std::vector<int> group_sizes(const IndexSpace& space, const Grouping& g) {
  std::vector<int> out;
  for (const auto& grp : g.groups) {
    int m = 1;
    for (int j : grp) m *= space.size_of(j);
    out.push_back(m);
  }
  return out;
}

}  // namespace

int grouped_state_index(const FactoredMdp& mdp, const Grouping& g, int s) {
  check_grouping(g, mdp.num_agents());
  return regroup(mdp.states(), g, s);
}

int grouped_action_index(const FactoredMdp& mdp, const Grouping& g, int a) {
  check_grouping(g, mdp.num_agents());
  return regroup(mdp.actions(), g, a);
}

FactoredMdp grouped_view(const FactoredMdp& mdp, const Grouping& g) {
  check_grouping(g, mdp.num_agents());
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<int> smap(S), amap(A);
  for (int s = 0; s < S; ++s) smap[s] = regroup(mdp.states(), g, s);
  for (int a = 0; a < A; ++a) amap[a] = regroup(mdp.actions(), g, a);

  MdpSpec spec;
  spec.local_state_sizes = group_sizes(mdp.states(), g);
  spec.local_action_sizes = group_sizes(mdp.actions(), g);
  spec.gamma = mdp.gamma();
  spec.transition.assign(static_cast<std::size_t>(A) * S * S, 0.0);
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) {
      auto p = mdp.row(a, s);
      for (int t = 0; t < S; ++t)
        spec.transition[(static_cast<std::size_t>(amap[a]) * S + smap[s]) * S + smap[t]] = p[t];
    }

  for (std::size_t k = 0; k < g.groups.size(); ++k) {
    const auto& grp = g.groups[k];
    std::vector<int> ms, ma;
    bool dynamic = false;
    double bound = 0.0;
    for (int j : grp) {
      ms.push_back(mdp.states().size_of(j));
      ma.push_back(mdp.actions().size_of(j));
      dynamic = dynamic || mdp.local_reward(j).next_state_dependent;
      bound += mdp.reward_bound(j);
    }
    const IndexSpace gs(ms), ga(ma);
    const int width = dynamic ? gs.size() : 1;
    std::vector<double> values(static_cast<std::size_t>(gs.size()) * ga.size() * width, 0.0);
    for (int s = 0; s < gs.size(); ++s)
      for (int a = 0; a < ga.size(); ++a)
        for (int t = 0; t < width; ++t) {
          double v = 0.0;
          for (std::size_t m = 0; m < grp.size(); ++m)
            v += mdp.local_reward(grp[m])(gs.component(s, static_cast<int>(m)), ga.component(a, static_cast<int>(m)),
                                          gs.component(t, static_cast<int>(m)));
          values[(static_cast<std::size_t>(s) * ga.size() + a) * width + t] = v;
        }
    spec.rewards.push_back(dynamic ? LocalReward::transition(gs.size(), ga.size(), std::move(values))
                                   : LocalReward::state_action(gs.size(), ga.size(), std::move(values)));
    spec.reward_bounds.push_back(bound);
  }
  if (!mdp.spec().start_states.empty()) {
    for (int s : mdp.start_states()) spec.start_states.push_back(smap[s]);
    std::sort(spec.start_states.begin(), spec.start_states.end());
  }
  return FactoredMdp(std::move(spec));
}

SeparableKernel reference_kernel(const FactoredMdp& mdp, const Grouping& g) {
  check_grouping(g, mdp.num_agents());
  const FactoredMdp view = grouped_view(mdp, g);
  SeparableKernel k = uniform_kernel(view);
  const IndexSpace& os = mdp.states();
  const IndexSpace& oa = mdp.actions();
  const int S = mdp.num_states(), A = mdp.num_actions();

  for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
    const auto& grp = g.groups[gi];
    std::vector<int> ms, ma;
    for (int j : grp) {
      ms.push_back(os.size_of(j));
      ma.push_back(oa.size_of(j));
    }
    const IndexSpace gs(ms), ga(ma);
    // Law of the group's next local state given a joint (s,a).
    auto group_law = [&](int s, int a) {
      std::vector<double> law(gs.size(), 0.0);
      auto p = mdp.row(a, s);
      for (int t = 0; t < S; ++t) {
        int idx = 0;
        for (int j : grp) idx = idx * os.size_of(j) + os.component(t, j);
        law[idx] += p[t];
      }
      return law;
    };
    auto member_of = [&](int idx, std::size_t m) { return gs.component(idx, static_cast<int>(m)); };

    for (int sg = 0; sg < gs.size(); ++sg)
      for (int ag = 0; ag < ga.size(); ++ag) {
        std::vector<std::vector<double>> laws;
        for (int s = 0; s < S; ++s) {
          bool match = true;
          for (std::size_t m = 0; m < grp.size() && match; ++m) match = os.component(s, grp[m]) == member_of(sg, m);
          if (!match) continue;
          for (int a = 0; a < A; ++a) {
            bool am = true;
            for (std::size_t m = 0; m < grp.size() && am; ++m) am = oa.component(a, grp[m]) == ga.component(ag, static_cast<int>(m));
            if (am) laws.push_back(group_law(s, a));
          }
        }
        // Members whose own marginal is the same for every consistent (s,a).
        auto marginal = [&](const std::vector<double>& law, const std::vector<std::size_t>& members) {
          std::vector<double> out;
          std::vector<int> sizes;
          for (std::size_t m : members) sizes.push_back(ms[m]);
          const IndexSpace sub(sizes);
          out.assign(sub.size(), 0.0);
          for (int idx = 0; idx < gs.size(); ++idx) {
            int o = 0;
            for (std::size_t m : members) o = o * ms[m] + member_of(idx, m);
            out[o] += law[idx];
          }
          return out;
        };
        auto constant = [&](const std::vector<std::size_t>& members) {
          const auto first = marginal(laws.front(), members);
          for (const auto& law : laws) {
            const auto cur = marginal(law, members);
            for (std::size_t q = 0; q < cur.size(); ++q)
              if (std::abs(cur[q] - first[q]) > 1e-12) return false;
          }
          return true;
        };
        std::vector<std::size_t> internal;
        for (std::size_t m = 0; m < grp.size(); ++m)
          if (constant({m})) internal.push_back(m);
        if (!internal.empty() && !constant(internal)) internal.clear();

        auto row = k.row(static_cast<int>(gi), ag, sg);
        const auto inner = internal.empty() ? std::vector<double>{1.0} : marginal(laws.front(), internal);
        double ext_mass = 1.0;
        for (std::size_t m = 0; m < grp.size(); ++m)
          if (std::find(internal.begin(), internal.end(), m) == internal.end()) ext_mass /= ms[m];
        for (int idx = 0; idx < gs.size(); ++idx) {
          int o = 0;
          for (std::size_t m : internal) o = o * ms[m] + member_of(idx, m);
          row[idx] = inner[internal.empty() ? 0 : o] * ext_mass;
        }
      }
  }
  return k;
}

RandomMdp random_factored_mdp(const RandomMdpSpec& rs) {
  if (!(rs.coupling >= 0.0 && rs.coupling <= 1.0)) throw ValidationError("coupling must lie in [0,1]");
  if (rs.state_sizes.size() != rs.action_sizes.size() || rs.state_sizes.empty())
    throw ValidationError("random_factored_mdp: size lists disagree");
  RngStream rng = RngStream::derive(rs.seed, 0, 0);
  auto dirichlet = [&](std::span<double> row) {
    double z = 0.0;
    for (double& x : row) z += (x = rng.exponential());
    for (double& x : row) x /= z;
  };
  SeparableKernel k(rs.state_sizes, rs.action_sizes);
  for (int i = 0; i < k.num_agents(); ++i)
    for (int a = 0; a < rs.action_sizes[i]; ++a)
      for (int s = 0; s < rs.state_sizes[i]; ++s) dirichlet(k.row(i, a, s));

  MdpSpec spec;
  spec.local_state_sizes = rs.state_sizes;
  spec.local_action_sizes = rs.action_sizes;
  spec.gamma = rs.gamma;
  const IndexSpace states(rs.state_sizes), actions(rs.action_sizes);
  const int S = states.size(), A = actions.size();
  spec.transition.assign(static_cast<std::size_t>(A) * S * S, 0.0);
  std::vector<double> prod, joint(S);
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) {
      product_row(k, states, actions, s, a, prod);
      dirichlet(joint);
      double* row = spec.transition.data() + (static_cast<std::size_t>(a) * S + s) * S;
      double z = 0.0;
      for (int t = 0; t < S; ++t) z += (row[t] = (1.0 - rs.coupling) * prod[t] + rs.coupling * joint[t]);
      for (int t = 0; t < S; ++t) row[t] /= z;
    }
  for (std::size_t i = 0; i < rs.state_sizes.size(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(rs.state_sizes[i]) * rs.action_sizes[i]);
    for (double& x : r) x = rng.uniform();
    spec.rewards.push_back(LocalReward::state_action(rs.state_sizes[i], rs.action_sizes[i], std::move(r)));
  }
  RandomMdp out{FactoredMdp(std::move(spec)), std::move(k)};
  return out;
}

}  // namespace ilab

#include "ilab/mdp.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace ilab {

double sup_norm_diff(const Table& a, const Table& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("sup_norm_diff: shape mismatch");
  double m = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
  return m;
}

double sup_norm(const Table& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(v.size()); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

int compose_index(std::span<const int> locals, std::span<const int> sizes) {
  if (locals.size() != sizes.size())
    throw IndexError("compose_index: expected " + std::to_string(sizes.size()) + " coordinates, got " +
                     std::to_string(locals.size()));
  int joint = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (locals[i] < 0 || locals[i] >= sizes[i])
      throw IndexError("compose_index: coordinate " + std::to_string(i) + " = " + std::to_string(locals[i]) +
                       " outside [0," + std::to_string(sizes[i]) + ")");
    joint = joint * sizes[i] + locals[i];
  }
  return joint;
}

std::vector<int> decompose_index(int joint, std::span<const int> sizes) {
  long long total = 1;
  for (int n : sizes) total *= n;
  if (joint < 0 || joint >= total)
    throw IndexError("decompose_index: " + std::to_string(joint) + " outside [0," + std::to_string(total) + ")");
  std::vector<int> locals(sizes.size());
  for (std::size_t i = sizes.size(); i-- > 0;) {
    locals[i] = joint % sizes[i];
    joint /= sizes[i];
  }
  return locals;
}

IndexSpace::IndexSpace(std::vector<int> sizes) : sizes_(std::move(sizes)), strides_(sizes_.size()) {
  long long total = 1;
  for (std::size_t i = sizes_.size(); i-- > 0;) {
    if (sizes_[i] <= 0) throw ValidationError("IndexSpace: nonpositive size");
    strides_[i] = static_cast<int>(total);
    total *= sizes_[i];
    if (total > (1LL << 30)) throw TooLarge("IndexSpace: joint space too large");
  }
  size_ = static_cast<int>(total);
}

LocalReward LocalReward::state_action(int states, int actions, std::vector<double> values) {
  return LocalReward{states, actions, false, std::move(values)};
}

LocalReward LocalReward::transition(int states, int actions, std::vector<double> values) {
  return LocalReward{states, actions, true, std::move(values)};
}

namespace {

template <typename... T>
std::string cat(const T&... parts) {
  std::ostringstream os;
  ((os << parts), ...);
  return os.str();
}

}  // namespace

ValidationReport validate(const MdpSpec& spec) {
  ValidationReport report;
  auto add = [&](ValidationIssue v) { report.push_back(std::move(v)); };

  const std::size_t n = spec.local_state_sizes.size();
  bool dims_ok = n > 0 && spec.local_action_sizes.size() == n;
  if (!dims_ok)
    add({IssueKind::kDimension, -1, -1, -1, -1, 0.0,
         cat("agent count mismatch: ", n, " state sizes, ", spec.local_action_sizes.size(), " action sizes")});
  long long S = 1, A = 1;
  for (std::size_t i = 0; i < n && dims_ok; ++i) {
    if (spec.local_state_sizes[i] <= 0 || spec.local_action_sizes[i] <= 0) {
      add({IssueKind::kDimension, static_cast<int>(i), -1, -1, -1, 0.0, cat("agent ", i, ": nonpositive size")});
      dims_ok = false;
      break;
    }
    S *= spec.local_state_sizes[i];
    A *= spec.local_action_sizes[i];
    if (S * S * A > (1LL << 32)) {
      add({IssueKind::kDimension, -1, -1, -1, -1, 0.0, "joint spaces too large for dense storage"});
      dims_ok = false;
    }
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0))
    add({IssueKind::kGamma, -1, -1, -1, -1, spec.gamma, cat("gamma ", spec.gamma, " outside (0,1)")});
  if (!dims_ok) return report;

  if (static_cast<long long>(spec.transition.size()) != A * S * S) {
    add({IssueKind::kDimension, -1, -1, -1, -1, static_cast<double>(spec.transition.size()),
         cat("transition has ", spec.transition.size(), " entries, expected ", A * S * S)});
  } else {
    for (long long a = 0; a < A; ++a) {
      for (long long s = 0; s < S; ++s) {
        const double* row = spec.transition.data() + (a * S + s) * S;
        double sum = 0.0;
        bool finite = true;
        for (long long t = 0; t < S; ++t) {
          const double p = row[t];
          if (!std::isfinite(p)) {
            finite = false;
            add({IssueKind::kNonFinite, -1, static_cast<int>(a), static_cast<int>(s), static_cast<int>(t), p,
                 cat("P[a=", a, "][s=", s, "][s'=", t, "] is not finite")});
            continue;
          }
          if (p < 0.0 || p > 1.0)
            add({IssueKind::kProbabilityRange, -1, static_cast<int>(a), static_cast<int>(s), static_cast<int>(t), p,
                 cat("P[a=", a, "][s=", s, "][s'=", t, "] = ", p, " outside [0,1]")});
          sum += p;
        }
        if (finite && std::abs(sum - 1.0) > kRowSumTol)
          add({IssueKind::kRowSum, -1, static_cast<int>(a), static_cast<int>(s), -1, sum,
               cat("row action ", a, " state ", s, " sums to ", sum)});
      }
    }
  }

  if (spec.rewards.size() != n) {
    add({IssueKind::kDimension, -1, -1, -1, -1, static_cast<double>(spec.rewards.size()),
         cat("expected ", n, " reward tables, got ", spec.rewards.size())});
    return report;
  }
  if (!spec.reward_bounds.empty() && spec.reward_bounds.size() != n)
    add({IssueKind::kDimension, -1, -1, -1, -1, static_cast<double>(spec.reward_bounds.size()),
         cat("expected ", n, " reward bounds, got ", spec.reward_bounds.size())});
  for (std::size_t i = 0; i < n; ++i) {
    const LocalReward& r = spec.rewards[i];
    const int Si = spec.local_state_sizes[i], Ai = spec.local_action_sizes[i];
    const std::size_t expect =
        static_cast<std::size_t>(Si) * Ai * (r.next_state_dependent ? static_cast<std::size_t>(Si) : 1);
    if (r.states != Si || r.actions != Ai || r.values.size() != expect) {
      add({IssueKind::kDimension, static_cast<int>(i), -1, -1, -1, 0.0, cat("agent ", i, ": reward shape mismatch")});
      continue;
    }
    const double bound =
        spec.reward_bounds.size() == n ? spec.reward_bounds[i] : 1.0;
    if (!(bound > 0.0) || !std::isfinite(bound))
      add({IssueKind::kRewardRange, static_cast<int>(i), -1, -1, -1, bound, cat("agent ", i, ": bad reward bound")});
    const int width = r.next_state_dependent ? Si : 1;
    for (int s = 0; s < Si; ++s)
      for (int a = 0; a < Ai; ++a)
        for (int t = 0; t < width; ++t) {
          const double v = r.values[(static_cast<std::size_t>(s) * Ai + a) * width + t];
          if (!std::isfinite(v) || v < 0.0 || v > bound) {
            ValidationIssue is{IssueKind::kRewardRange, static_cast<int>(i), a, s, r.next_state_dependent ? t : -1, v,
                               ""};
            is.message = cat("reward of agent ", i, " at (s=", s, ", a=", a, r.next_state_dependent ? ", s'=" : "",
                               r.next_state_dependent ? std::to_string(t) : std::string(), ") = ", v,
                               " outside [0,", bound, "]");
            add(std::move(is));
          }
        }
  }
  std::set<int> seen;
  for (int s : spec.start_states) {
    if (s < 0 || s >= S || !seen.insert(s).second)
      add({IssueKind::kStartState, -1, -1, s, -1, static_cast<double>(s), cat("bad or repeated start state ", s)});
  }
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::string out;
  for (const auto& is : report) {
    out += is.message;
    out += '\n';
  }
  return out;
}

FactoredMdp::FactoredMdp(MdpSpec spec) : spec_(std::move(spec)) {
  const ValidationReport report = validate(spec_);
  if (!report.empty()) throw ValidationError("invalid mdp:\n" + format_report(report));
  states_ = IndexSpace(spec_.local_state_sizes);
  actions_ = IndexSpace(spec_.local_action_sizes);
  const int S = states_.size(), A = actions_.size(), n = num_agents();
  if (spec_.reward_bounds.empty()) spec_.reward_bounds.assign(n, 1.0);

  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) {
      double* row = spec_.transition.data() + (static_cast<std::size_t>(a) * S + s) * S;
      double sum = 0.0;
      for (int t = 0; t < S; ++t) sum += row[t];
      if (sum != 1.0)
        for (int t = 0; t < S; ++t) row[t] /= sum;
    }

  agent_reward_.assign(static_cast<std::size_t>(n) * S * A, 0.0);
  total_reward_ = Table(S, A);
  for (int i = 0; i < n; ++i) {
    const LocalReward& r = spec_.rewards[i];
    const int Si = states_.size_of(i);
    std::vector<double> marginal(Si);
    for (int s = 0; s < S; ++s) {
      const int si = states_.component(s, i);
      for (int a = 0; a < A; ++a) {
        const int ai = actions_.component(a, i);
        double v;
        if (!r.next_state_dependent) {
          v = r(si, ai, 0);
        } else {
          std::fill(marginal.begin(), marginal.end(), 0.0);
          auto p = row(a, s);
          for (int t = 0; t < S; ++t) marginal[states_.component(t, i)] += p[t];
          v = 0.0;
          for (int ti = 0; ti < Si; ++ti) v += marginal[ti] * r(si, ai, ti);
        }
        agent_reward_[(static_cast<std::size_t>(i) * S + s) * A + a] = v;
        total_reward_(s, a) += v;
      }
    }
  }

  if (spec_.start_states.empty()) {
    start_states_.resize(S);
    for (int s = 0; s < S; ++s) start_states_[s] = s;
  } else {
    start_states_ = spec_.start_states;
  }
}

double FactoredMdp::effective_agents() const {
  double total = 0.0;
  for (double b : spec_.reward_bounds) total += std::max(1.0, b);
  return total;
}

double FactoredMdp::realized_reward(int agent, int s, int a, int s_next) const {
  return spec_.rewards[agent](states_.component(s, agent), actions_.component(a, agent),
                              states_.component(s_next, agent));
}

double total_reward(const FactoredMdp& mdp, int s, int a) {
  if (s < 0 || s >= mdp.num_states()) throw IndexError("total_reward: state " + std::to_string(s) + " out of range");
  if (a < 0 || a >= mdp.num_actions()) throw IndexError("total_reward: action " + std::to_string(a) + " out of range");
  return mdp.expected_reward(s, a);
}

int sample_transition(const FactoredMdp& mdp, int s, int a, RngStream& rng) {
  if (s < 0 || s >= mdp.num_states()) throw IndexError("sample_transition: state out of range");
  if (a < 0 || a >= mdp.num_actions()) throw IndexError("sample_transition: action out of range");
  return static_cast<int>(rng.categorical(mdp.row(a, s)));
}

JointPolicy joint_policy_of(const FactoredPolicy& fp) {
  std::vector<int> ss, as;
  for (const auto& p : fp.agents) {
    ss.push_back(p.rows());
    as.push_back(p.cols());
  }
  const IndexSpace states(ss), actions(as);
  JointPolicy pi(states.size(), actions.size());
  const int n = static_cast<int>(fp.agents.size());
  for (int s = 0; s < states.size(); ++s)
    for (int a = 0; a < actions.size(); ++a) {
      double p = 1.0;
      for (int i = 0; i < n; ++i) p *= fp.agents[i](states.component(s, i), actions.component(a, i));
      pi(s, a) = p;
    }
  return pi;
}

FactoredPolicy uniform_factored_policy(const FactoredMdp& mdp) {
  FactoredPolicy fp;
  for (int i = 0; i < mdp.num_agents(); ++i) {
    const int Ai = mdp.actions().size_of(i);
    fp.agents.emplace_back(mdp.states().size_of(i), Ai, 1.0 / Ai);
  }
  return fp;
}

FactoredPolicy random_factored_policy(const FactoredMdp& mdp, RngStream& rng) {
  FactoredPolicy fp;
  for (int i = 0; i < mdp.num_agents(); ++i) {
    LocalPolicy p(mdp.states().size_of(i), mdp.actions().size_of(i));
    for (int s = 0; s < p.rows(); ++s) {
      double sum = 0.0;
      for (double& x : p.row(s)) sum += (x = rng.exponential());
      for (double& x : p.row(s)) x /= sum;
    }
    fp.agents.push_back(std::move(p));
  }
  return fp;
}

void check_policy_shape(const FactoredMdp& mdp, const FactoredPolicy& fp) {
  if (static_cast<int>(fp.agents.size()) != mdp.num_agents())
    throw DimensionMismatch("factored policy has wrong agent count");
  for (int i = 0; i < mdp.num_agents(); ++i)
    if (fp.agents[i].rows() != mdp.states().size_of(i) || fp.agents[i].cols() != mdp.actions().size_of(i))
      throw DimensionMismatch("factored policy of agent " + std::to_string(i) + " has wrong shape");
}

void check_policy_shape(const FactoredMdp& mdp, const JointPolicy& pi) {
  if (pi.rows() != mdp.num_states() || pi.cols() != mdp.num_actions())
    throw DimensionMismatch("joint policy has wrong shape");
}

}  // namespace ilab

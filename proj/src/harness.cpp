#include "ilab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "ilab/envs.hpp"
#include "ilab/io.hpp"
#include "ilab/solvers.hpp"

namespace ilab {

double optimal_average_reward(const FactoredMdp& mdp) {
  return average_reward(mdp, greedy_policy(value_iteration(mdp)));
}

double mean_episode_reward(const FactoredMdp& mdp, const FactoredPolicy& pi, int episode_len, int episodes,
                           std::uint64_t seed, std::uint64_t tag) {
  check_policy_shape(mdp, pi);
  if (episode_len < 1 || episodes < 1) throw ValidationError("episodes and episode length must be positive");
  const int n = mdp.num_agents();
  RngStream env = RngStream::derive(seed, tag, kTestStreamBase);
  std::vector<RngStream> agents;
  for (int i = 0; i < n; ++i) agents.push_back(RngStream::derive(seed, tag, kTestStreamBase + 1 + i));
  const auto starts = mdp.start_states();
  std::vector<int> la(n);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int s = starts[env.below(starts.size())];
    for (int k = 0; k < episode_len; ++k) {
      for (int i = 0; i < n; ++i)
        la[i] = static_cast<int>(agents[i].categorical(pi.agents[i].row(mdp.states().component(s, i))));
      const int a = mdp.actions().compose(la);
      const int t = sample_transition(mdp, s, a, env);
      for (int i = 0; i < n; ++i) total += mdp.realized_reward(i, s, a, t);
      s = t;
    }
  }
  return total / (static_cast<double>(episodes) * episode_len);
}

double normalized_reward(const FactoredMdp& mdp, const FactoredPolicy& pi, int episode_len, int episodes,
                         std::uint64_t seed, std::optional<double> normalizer, std::uint64_t tag) {
  const double z = normalizer ? *normalizer : optimal_average_reward(mdp);
  if (!(std::abs(z) > 0.0)) throw DivisionByZero("optimal average reward is zero");
  return mean_episode_reward(mdp, pi, episode_len, episodes, seed, tag) / z;
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("algorithm")) {
      const auto a = j["algorithm"].get<std::string>();
      if (a == "iql") c.algorithm = Algorithm::kIql;
      else if (a == "inac") c.algorithm = Algorithm::kInac;
      else throw ValidationError("unknown algorithm '" + a + "'");
    }
    if (j.contains("env")) c.env = j["env"].get<std::string>();
    if (j.contains("grouping")) c.grouping = j["grouping"].get<std::string>();
    if (j.contains("mdp_file")) c.mdp_file = j["mdp_file"].get<std::string>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("runs")) c.runs = j["runs"].get<int>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("train_steps")) c.train_steps = j["train_steps"].get<long>();
    if (j.contains("test_steps")) c.test_steps = j["test_steps"].get<long>();
    if (j.contains("episode_len")) c.episode_len = j["episode_len"].get<int>();
    if (j.contains("eval_stride")) c.eval_stride = j["eval_stride"].get<long>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("k0")) {
      if (j["k0"].is_null()) c.k0.reset();
      else c.k0 = j["k0"].get<double>();
    }
    if (j.contains("K")) c.inner_K = j["K"].get<long>();
    if (j.contains("eta_mode")) c.eta.mode = parse_eta_mode(j["eta_mode"].get<std::string>());
    if (j.contains("eta")) c.eta.value = j["eta"].get<double>();
    if (j.contains("epsilon")) c.explore.epsilon = j["epsilon"].get<double>();
    if (j.contains("epsilon_schedule")) {
      const auto s = j["epsilon_schedule"].get<std::string>();
      if (s == "none") c.explore.kind = ExplorationKind::kNone;
      else if (s == "constant") c.explore.kind = ExplorationKind::kConstant;
      else if (s == "linear") c.explore.kind = ExplorationKind::kLinearDecay;
      else throw ValidationError("unknown epsilon schedule '" + s + "'");
    }
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return c;
}

FactoredMdp experiment_env(const ExperimentConfig& cfg) {
  if (cfg.env == "synthetic3") {
    const FactoredMdp base = synthetic3(cfg.gamma.value_or(0.99));
    return grouped_view(base, parse_grouping(cfg.grouping, 3));
  }
  if (cfg.env == "file") return load_mdp(cfg.mdp_file);
  throw ValidationError("unknown env '" + cfg.env + "'");
}

namespace {

RunRecord one_run(const FactoredMdp& mdp, const ExperimentConfig& cfg, std::uint64_t seed, double normalizer) {
  const int episodes = static_cast<int>(std::max<long>(1, cfg.test_steps / cfg.episode_len));
  LearnerProbe probe;
  probe.scores.push_back({"normalized_reward", [&, seed](const FactoredPolicy& pi, long step) {
                            return normalized_reward(mdp, pi, cfg.episode_len, episodes, seed, normalizer,
                                                     static_cast<std::uint64_t>(step) + 1);
                          }});
  if (cfg.algorithm == Algorithm::kIql) {
    IqlConfig ic;
    ic.K = cfg.train_steps;
    ic.alpha = cfg.alpha;
    ic.k0 = cfg.k0;
    ic.seed = seed;
    ic.eval_stride = cfg.eval_stride;
    return iql_run(mdp, ic, probe).record;
  }
  InacConfig nc;
  nc.T = static_cast<int>(cfg.train_steps / cfg.inner_K);
  nc.K = cfg.inner_K;
  nc.alpha = cfg.alpha;
  nc.k0 = cfg.k0;
  nc.eta = cfg.eta;
  nc.explore = cfg.explore;
  nc.seed = seed;
  // scores keyed by training step
  auto& fn = probe.scores.front().second;
  auto inner = fn;
  fn = [inner, K = cfg.inner_K](const FactoredPolicy& pi, long t) { return inner(pi, t * K); };
  RunRecord rec = inac_run(mdp, nc, probe).record;
  for (auto& e : rec.events) e.step *= cfg.inner_K;
  return rec;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.runs < 1 && cfg.seeds.empty()) throw ValidationError("experiment: runs must be at least 1");
  if (cfg.episode_len < 1) throw ValidationError("experiment: episode length must be at least 1");
  if (cfg.algorithm == Algorithm::kInac && cfg.inner_K < 1) throw ValidationError("experiment: K must be at least 1");
  const FactoredMdp mdp = experiment_env(cfg);
  ExperimentResult res;
  res.normalizer = optimal_average_reward(mdp);
  if (!(res.normalizer > 0.0)) throw DivisionByZero("optimal average reward is zero");

  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seeds.empty())
    for (int r = 0; r < cfg.runs; ++r) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
  res.runs.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(seeds.size())));
  auto worker = [&](int w) {
    for (std::size_t r = w; r < seeds.size(); r += threads) {
      try {
        res.runs[r] = one_run(mdp, cfg, seeds[r], res.normalizer);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  res.aggregate = aggregate(res.runs);
  for (const auto& run : res.runs) {
    const auto s = run.series("normalized_reward");
    res.final_scores.push_back(s.empty() ? std::nan("") : s.back().second);
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    std::vector<fs::path> written;
    try {
      for (std::size_t r = 0; r < res.runs.size(); ++r) {
        const fs::path p = fs::path(cfg.out_dir) / ("run-" + std::to_string(r) + ".csv");
        std::ofstream out(p, std::ios::binary);
        written.push_back(p);
        write_run_csv(out, std::span<const RunRecord>(&res.runs[r], 1));
        if (!out) throw IoError("write to '" + p.string() + "' failed");
      }
      const fs::path p = fs::path(cfg.out_dir) / "aggregate.csv";
      std::ofstream out(p, std::ios::binary);
      written.push_back(p);
      write_aggregate_csv(out, res.aggregate);
      if (!out) throw IoError("write to '" + p.string() + "' failed");
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }
  return res;
}

int VerifyReport::violations() const {
  int v = 0;
  for (const auto& c : checks) v += c.pass ? 0 : 1;
  return v;
}

namespace {

LocalQTable agent_table(const QTable& q) {
  LocalQTable out(q.rows(), q.cols());
  std::copy(q.data().begin(), q.data().end(), out.data().begin());
  return out;
}

JointPolicy as_joint(const LocalPolicy& p) {
  JointPolicy out(p.rows(), p.cols());
  std::copy(p.data().begin(), p.data().end(), out.data().begin());
  return out;
}

}  // namespace

VerifyReport verify_bounds(const FactoredMdp& mdp, const VerifyOptions& opts) {
  VerifyReport rep;
  SeparableKernel kernel;
  if (opts.witness) {
    kernel = *opts.witness;
    rep.dependence = max_tv_gap(mdp, kernel);
    rep.dependence_source = "witness";
  } else {
    DependenceConfig dc;
    dc.seed = opts.seed;
    dc.lower_bound = false;
    DependenceEstimate est = optimize_dependence(mdp, dc);
    kernel = std::move(est.kernel);
    rep.dependence = est.value;
    rep.dependence_source = "optimizer";
  }
  const double E = rep.dependence;
  const double g = mdp.gamma();
  const int n = mdp.num_agents();
  const double scale = 2.0 * g * E / ((1.0 - g) * (1.0 - g));
  const FactoredMdp sep = build_separable_mdp(mdp, kernel);
  auto add = [&](std::string name, int agent, int policy, double lhs, double rhs) {
    const bool ok = std::isfinite(lhs) && lhs <= rhs + opts.tolerance;
    rep.checks.push_back({std::move(name), agent, policy, lhs, rhs, rhs - lhs, ok});
  };
  ChainOptions chain;
  if (!mdp.spec().start_states.empty()) chain.start_states = mdp.spec().start_states;

  std::vector<FactoredMdp> locals;
  for (int i = 0; i < n; ++i) locals.push_back(local_mdp(mdp, kernel, i));
  auto cap = [&](int i) { return std::max(1.0, mdp.reward_bound(i)); };

  const QTable qstar = value_iteration(mdp);
  const QTable qhat = value_iteration(sep);
  add("optimal_q_gap", -1, -1, sup_norm_diff(qstar, qhat), mdp.effective_agents() * scale);
  double lo = 0.0, hi = 0.0;
  for (double v : qstar.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  add("bounded_qstar", -1, -1, std::max({0.0, -lo, hi - mdp.effective_agents() / (1.0 - g)}), 0.0);

  // uniform behavior policy
  const FactoredPolicy uniform = uniform_factored_policy(mdp);
  try {
    const StationaryDist db = stationary_distribution(mdp, joint_policy_of(uniform), kDefaultTol, chain);
    for (int i = 0; i < n; ++i) {
      const LocalQTable qt = aggregated_fixed_point(mdp, i, db, Optimality{}, kDefaultTol, ZeroMassCells::kUniformWeight);
      const LocalQTable qloc = agent_table(value_iteration(locals[i]));
      add("aggregated_optimal_gap", i, -1, sup_norm_diff(qt, qloc), cap(i) * scale);
      double l = 0.0, h = 0.0;
      for (double v : qt.data()) {
        l = std::min(l, v);
        h = std::max(h, v);
      }
      add("bounded_aggregated", i, -1, std::max({0.0, -l, h - cap(i) / (1.0 - g)}), 0.0);
    }
  } catch (const Error& e) {
    add(std::string("aggregated_optimal_gap:") + e.what(), -1, -1, std::nan(""), 0.0);
  }

  std::vector<FactoredPolicy> policies{uniform};
  RngStream rng = RngStream::derive(opts.seed, 0, 7);
  for (int p = 0; p < opts.random_policies; ++p) policies.push_back(random_factored_policy(mdp, rng));
  for (std::size_t p = 0; p < policies.size(); ++p) {
    const JointPolicy pi = joint_policy_of(policies[p]);
    add("policy_q_gap", -1, static_cast<int>(p), sup_norm_diff(policy_q(mdp, pi), policy_q(sep, pi)),
        mdp.effective_agents() * scale);
    try {
      const StationaryDist d = stationary_distribution(mdp, pi, kDefaultTol, chain);
      for (int i = 0; i < n; ++i) {
        const LocalQTable qt =
            aggregated_fixed_point(mdp, i, d, Evaluation{pi}, kDefaultTol, ZeroMassCells::kUniformWeight);
        const LocalQTable qloc = agent_table(policy_q(locals[i], as_joint(policies[p].agents[i])));
        add("aggregated_policy_gap", i, static_cast<int>(p), sup_norm_diff(qt, qloc), cap(i) * scale);
      }
    } catch (const Error& e) {
      add(std::string("aggregated_policy_gap:") + e.what(), -1, static_cast<int>(p), std::nan(""), 0.0);
    }
  }

  RngStream nr = RngStream::derive(opts.seed, 1, 7);
  for (int k = 0; k < opts.nonexpansive_samples; ++k) {
    QTable q(mdp.num_states(), mdp.num_actions());
    Table w(mdp.num_states(), mdp.num_actions());
    for (double& x : q.data()) x = 2.0 * nr.uniform() - 1.0;
    for (double& x : w.data()) x = nr.uniform() < 0.3 ? 0.0 : nr.exponential();
    for (int i = 0; i < n; ++i) {
      const LocalQTable x = project_to_agent(mdp, i, w, q, ZeroMassCells::kUniformWeight);
      add("nonexpansive", i, k, sup_norm(lift_from_agent(mdp, i, x)), sup_norm(q));
    }
  }
  return rep;
}

}  // namespace ilab

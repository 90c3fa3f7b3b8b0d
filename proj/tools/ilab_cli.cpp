// ilab command-line interface.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ilab/dependence.hpp"
#include "ilab/envs.hpp"
#include "ilab/harness.hpp"
#include "ilab/inac.hpp"
#include "ilab/io.hpp"
#include "ilab/iql.hpp"
#include "ilab/solvers.hpp"

using namespace ilab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitBounds = 4;

struct EnvArgs {
  std::string mdp_file;
  std::string env;
  std::string grouping;
  double gamma = 0.99;
};

void add_env_options(CLI::App* cmd, EnvArgs& e) {
  cmd->add_option("--mdp", e.mdp_file, "MDP JSON file");
  cmd->add_option("--env", e.env, "built-in environment (synthetic3)");
  cmd->add_option("--grouping", e.grouping, "grouping for synthetic3: 12, 23, 13 or e.g. 1,3;2");
  cmd->add_option("--gamma", e.gamma, "discount for built-in environments");
}

FactoredMdp load_env(const EnvArgs& e) {
  if (!e.mdp_file.empty()) {
    FactoredMdp m = load_mdp(e.mdp_file);
    if (!e.grouping.empty()) return grouped_view(m, parse_grouping(e.grouping, m.num_agents()));
    return m;
  }
  if (e.env == "synthetic3") {
    FactoredMdp m = synthetic3(e.gamma);
    if (!e.grouping.empty()) return grouped_view(m, parse_grouping(e.grouping, 3));
    return m;
  }
  throw ValidationError("give --mdp FILE or --env synthetic3");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

ChainOptions chain_of(const FactoredMdp& m) {
  ChainOptions c;
  if (!m.spec().start_states.empty()) c.start_states = m.spec().start_states;
  return c;
}

// Exact normalized value of a factored policy.
double exact_normalized(const FactoredMdp& m, const FactoredPolicy& pi, double opt) {
  return average_reward(m, joint_policy_of(pi)) / opt;
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular independent-learning laboratory"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;
  app.add_option("--seed", seed, "root seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads")->capture_default_str();
  app.add_option("--out-dir", out_dir, "output directory");

  // validate
  auto* c_validate = app.add_subcommand("validate", "check an MDP file");
  std::string v_file;
  c_validate->add_option("--mdp", v_file, "MDP JSON file")->required();

  // solve
  auto* c_solve = app.add_subcommand("solve", "optimal Q, greedy policy and uniform-policy stationary law");
  EnvArgs s_env;
  std::string s_out;
  double s_tol = kDefaultTol;
  add_env_options(c_solve, s_env);
  c_solve->add_option("--tol", s_tol);
  c_solve->add_option("--out", s_out, "JSON output (default stdout)");

  // deplevel
  auto* c_dep = app.add_subcommand("deplevel", "estimate the dependence level");
  EnvArgs d_env;
  DependenceConfig d_cfg;
  std::string d_kernel_out;
  int d_brute = 0;
  add_env_options(c_dep, d_env);
  c_dep->add_option("--starts", d_cfg.starts, "random starts")->capture_default_str();
  c_dep->add_option("--passes", d_cfg.passes, "coordinate passes")->capture_default_str();
  c_dep->add_option("--kernel-out", d_kernel_out, "write the achieving kernel");
  c_dep->add_option("--brute-force", d_brute, "also bracket by grid search at this resolution");

  // env
  auto* c_env = app.add_subcommand("env", "write a built-in or random MDP");
  std::string e_kind, e_grouping, e_out, e_states = "2,2", e_actions = "2,2";
  double e_gamma = 0.99, e_coupling = 0.0;
  c_env->add_option("kind", e_kind, "synthetic3 | random")->required();
  c_env->add_option("--grouping", e_grouping);
  c_env->add_option("--gamma", e_gamma);
  c_env->add_option("--states", e_states, "random: comma-separated local state sizes");
  c_env->add_option("--actions", e_actions, "random: comma-separated local action sizes");
  c_env->add_option("--coupling", e_coupling, "random: coupling λ");
  c_env->add_option("--out", e_out, "output file (default stdout)");

  // iql
  auto* c_iql = app.add_subcommand("iql", "independent Q-learning");
  EnvArgs i_env;
  long i_K = 10000, i_stride = 1000;
  double i_alpha = 0.05;
  std::optional<double> i_k0;
  std::string i_out;
  add_env_options(c_iql, i_env);
  c_iql->add_option("--K", i_K)->capture_default_str();
  c_iql->add_option("--alpha", i_alpha)->capture_default_str();
  c_iql->add_option("--k0", i_k0, "default max(4α, 2·M2·log K)");
  c_iql->add_option("--eval-stride", i_stride)->capture_default_str();
  c_iql->add_option("--out", i_out, "CSV output (default stdout)");

  // inac
  auto* c_inac = app.add_subcommand("inac", "independent natural actor-critic");
  EnvArgs n_env;
  int n_T = 10;
  long n_K = 1000, n_inner_stride = 100;
  double n_alpha = 0.05, n_eta = 0.2, n_eps = 0.0;
  std::optional<double> n_k0;
  std::string n_eta_mode = "policy-space", n_eps_sched = "constant", n_out, n_inner_log;
  bool n_critic_error = false;
  add_env_options(c_inac, n_env);
  c_inac->add_option("--T", n_T)->capture_default_str();
  c_inac->add_option("--K", n_K)->capture_default_str();
  c_inac->add_option("--alpha", n_alpha)->capture_default_str();
  c_inac->add_option("--k0", n_k0);
  c_inac->add_option("--eta-mode", n_eta_mode, "theorem | constant | policy-space | experiment")->capture_default_str();
  c_inac->add_option("--eta", n_eta, "η for constant mode, η0 for experiment mode")->capture_default_str();
  c_inac->add_option("--epsilon", n_eps)->capture_default_str();
  c_inac->add_option("--epsilon-schedule", n_eps_sched, "constant | linear")->capture_default_str();
  c_inac->add_flag("--critic-error", n_critic_error, "record critic error against the aggregated fixed point");
  c_inac->add_option("--inner-log", n_inner_log, "inner-loop CSV");
  c_inac->add_option("--inner-stride", n_inner_stride)->capture_default_str();
  c_inac->add_option("--out", n_out, "CSV output (default stdout)");

  // experiment
  auto* c_exp = app.add_subcommand("experiment", "multi-seed training and testing");
  std::string x_config, x_algorithm, x_grouping, x_mdp;
  std::optional<int> x_runs;
  c_exp->add_option("--config", x_config, "JSON config");
  c_exp->add_option("--algorithm", x_algorithm, "iql | inac");
  c_exp->add_option("--grouping", x_grouping);
  c_exp->add_option("--mdp", x_mdp);
  c_exp->add_option("--runs", x_runs);

  // verify-bounds
  auto* c_ver = app.add_subcommand("verify-bounds", "check the model-difference bounds exactly");
  EnvArgs b_env;
  std::string b_kernel, b_out;
  add_env_options(c_ver, b_env);
  c_ver->add_option("--kernel", b_kernel, "witness kernel file (default: optimizer)");
  c_ver->add_option("--out", b_out, "CSV report (default stdout)");

  // mixing
  auto* c_mix = app.add_subcommand("mixing", "mixing profile under the uniform policy");
  EnvArgs m_env;
  int m_horizon = 200;
  std::string m_out;
  add_env_options(c_mix, m_env);
  c_mix->add_option("--horizon", m_horizon)->capture_default_str();
  c_mix->add_option("--out", m_out, "CSV of (k, gap) (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_validate) {
      const Json j = read_json_file(v_file);
      const MdpSpec spec = mdp_spec_from_json(j);
      const ValidationReport rep = validate(spec);
      if (!rep.empty()) {
        std::cerr << format_report(rep);
        return kExitValidation;
      }
      std::cout << "ok\n";
      return kExitOk;
    }
    if (*c_solve) {
      const FactoredMdp m = load_env(s_env);
      const QTable q = value_iteration(m, s_tol);
      Json j;
      j["q_star"] = table_to_json(q);
      j["greedy_policy"] = table_to_json(greedy_policy(q));
      j["optimal_average_reward"] = optimal_average_reward(m);
      try {
        j["stationary_uniform"] =
            stationary_to_json(stationary_distribution(m, joint_policy_of(uniform_factored_policy(m)), s_tol, chain_of(m)));
      } catch (const Error& e) {
        j["stationary_uniform"] = std::string("unavailable: ") + e.what();
      }
      emit(s_out, dump(j));
      return kExitOk;
    }
    if (*c_dep) {
      const FactoredMdp m = load_env(d_env);
      d_cfg.seed = seed;
      d_cfg.threads = threads;
      const DependenceEstimate est = optimize_dependence(m, d_cfg);
      Json j;
      j["value"] = est.value;
      j["certified_lower"] = est.certified_lower ? Json(*est.certified_lower) : Json(nullptr);
      j["method"] = est.method;
      if (d_env.env == "synthetic3" && d_env.mdp_file.empty() && !d_env.grouping.empty()) {
        const SeparableKernel ref = reference_kernel(synthetic3(d_env.gamma), parse_grouping(d_env.grouping, 3));
        j["reference_kernel_gap"] = max_tv_gap(m, ref);
      }
      if (d_brute > 0) {
        try {
          const DependenceBracket b = brute_force_dependence(m, d_brute);
          j["brute_force"] = {{"lower", b.lower}, {"upper", b.upper}, {"resolution", d_brute}};
        } catch (const TooLarge& e) {
          j["brute_force"] = std::string("unavailable: ") + e.what();
        }
      }
      std::cout << dump(j);
      if (!d_kernel_out.empty()) write_text_file(d_kernel_out, dump(kernel_to_json(est.kernel)));
      return kExitOk;
    }
    if (*c_env) {
      if (e_kind == "synthetic3") {
        FactoredMdp m = synthetic3(e_gamma);
        if (!e_grouping.empty()) m = grouped_view(m, parse_grouping(e_grouping, 3));
        emit(e_out, mdp_to_json(m).dump() + "\n");
        return kExitOk;
      }
      if (e_kind == "random") {
        RandomMdpSpec rs;
        rs.state_sizes = parse_sizes(e_states);
        rs.action_sizes = parse_sizes(e_actions);
        rs.coupling = e_coupling;
        rs.seed = seed;
        rs.gamma = e_gamma;
        emit(e_out, mdp_to_json(random_factored_mdp(rs).mdp).dump() + "\n");
        return kExitOk;
      }
      throw ValidationError("unknown env kind '" + e_kind + "'");
    }
    if (*c_iql) {
      const FactoredMdp m = load_env(i_env);
      IqlConfig cfg;
      cfg.K = i_K;
      cfg.alpha = i_alpha;
      cfg.k0 = i_k0;
      cfg.seed = seed;
      cfg.eval_stride = i_stride;
      LearnerProbe probe;
      try {
        const StationaryDist d =
            stationary_distribution(m, joint_policy_of(uniform_factored_policy(m)), kDefaultTol, chain_of(m));
        for (int i = 0; i < m.num_agents(); ++i) {
          LocalQTable ref = aggregated_fixed_point(m, i, d, Optimality{}, kDefaultTol, ZeroMassCells::kUniformWeight);
          const Table& marg = d.agent_marginals[i];
          for (std::size_t k = 0; k < ref.data().size(); ++k)
            if (!(marg.data()[k] > 0.0)) ref.data()[k] = std::nan("");
          probe.reference.push_back(std::move(ref));
        }
      } catch (const Error& e) {
        std::cerr << "note: no aggregated reference (" << e.what() << ")\n";
      }
      const double opt = optimal_average_reward(m);
      if (opt > 0.0)
        probe.scores.push_back({"normalized_value", [&](const FactoredPolicy& pi, long) { return exact_normalized(m, pi, opt); }});
      const IqlResult res = iql_run(m, cfg, probe);
      std::ostringstream os;
      write_run_csv(os, std::span<const RunRecord>(&res.record, 1));
      emit(i_out, os.str());
      return kExitOk;
    }
    if (*c_inac) {
      const FactoredMdp m = load_env(n_env);
      InacConfig cfg;
      cfg.T = n_T;
      cfg.K = n_K;
      cfg.alpha = n_alpha;
      cfg.k0 = n_k0;
      cfg.eta = {parse_eta_mode(n_eta_mode), n_eta};
      if (n_eps > 0.0) {
        if (n_eps_sched == "constant") cfg.explore = {ExplorationKind::kConstant, n_eps};
        else if (n_eps_sched == "linear") cfg.explore = {ExplorationKind::kLinearDecay, n_eps};
        else throw ValidationError("unknown epsilon schedule '" + n_eps_sched + "'");
      }
      cfg.seed = seed;
      cfg.inner_stride = n_inner_log.empty() ? 0 : n_inner_stride;
      const QTable qstar = value_iteration(m);
      const double opt = optimal_average_reward(m);
      LearnerProbe probe;
      probe.scores.push_back({"q_gap", [&](const FactoredPolicy& pi, long) {
                                return sup_norm_diff(qstar, policy_q(m, joint_policy_of(pi)));
                              }});
      if (opt > 0.0)
        probe.scores.push_back({"normalized_value", [&](const FactoredPolicy& pi, long) { return exact_normalized(m, pi, opt); }});
      if (n_critic_error)
        probe.critic_reference = [&](const FactoredPolicy& pi) {
          const JointPolicy jp = joint_policy_of(pi);
          const StationaryDist d = stationary_distribution(m, jp, kDefaultTol, chain_of(m));
          std::vector<LocalQTable> out;
          for (int i = 0; i < m.num_agents(); ++i)
            out.push_back(aggregated_fixed_point(m, i, d, Evaluation{jp}, kDefaultTol, ZeroMassCells::kUniformWeight));
          return out;
        };
      const InacResult res = inac_run(m, cfg, probe);
      std::ostringstream os;
      write_outer_csv(os, std::span<const RunRecord>(&res.record, 1));
      emit(n_out, os.str());
      if (!n_inner_log.empty()) {
        std::ostringstream in;
        write_run_csv(in, std::span<const RunRecord>(&res.inner, 1));
        write_text_file(n_inner_log, in.str());
      }
      return kExitOk;
    }
    if (*c_exp) {
      ExperimentConfig cfg;
      if (!x_config.empty()) {
        std::ifstream in(x_config);
        if (!in) throw IoError("cannot open '" + x_config + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = experiment_config_from_json(buf.str());
      }
      if (!x_algorithm.empty()) {
        if (x_algorithm == "iql") cfg.algorithm = Algorithm::kIql;
        else if (x_algorithm == "inac") cfg.algorithm = Algorithm::kInac;
        else throw ValidationError("unknown algorithm '" + x_algorithm + "'");
      }
      if (!x_grouping.empty()) cfg.grouping = x_grouping;
      if (!x_mdp.empty()) {
        cfg.env = "file";
        cfg.mdp_file = x_mdp;
      }
      if (x_runs) cfg.runs = *x_runs;
      if (app.get_option("--seed")->count()) cfg.seed = seed;
      if (app.get_option("--threads")->count()) cfg.threads = threads;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const ExperimentResult res = run_experiment(cfg);
      double mean = 0.0;
      for (double v : res.final_scores) mean += v;
      mean /= static_cast<double>(res.final_scores.size());
      Json j;
      j["normalizer"] = res.normalizer;
      j["runs"] = res.final_scores.size();
      j["final_normalized_reward_mean"] = mean;
      j["final_normalized_reward"] = res.final_scores;
      std::cout << dump(j);
      return kExitOk;
    }
    if (*c_ver) {
      const FactoredMdp m = load_env(b_env);
      VerifyOptions opts;
      opts.seed = seed;
      if (!b_kernel.empty()) opts.witness = kernel_from_json(read_json_file(b_kernel));
      const VerifyReport rep = verify_bounds(m, opts);
      std::ostringstream os;
      os << "check,agent,policy,lhs,rhs,slack,pass\n";
      for (const auto& c : rep.checks)
        os << c.name << ',' << c.agent << ',' << c.policy << ',' << format_double(c.lhs) << ',' << format_double(c.rhs)
           << ',' << format_double(c.slack) << ',' << (c.pass ? 1 : 0) << '\n';
      emit(b_out, os.str());
      std::cerr << "dependence " << format_double(rep.dependence) << " (" << rep.dependence_source << "), "
                << rep.violations() << " violation(s)\n";
      return rep.violations() == 0 ? kExitOk : kExitBounds;
    }
    if (*c_mix) {
      const FactoredMdp m = load_env(m_env);
      const MixingProfile mp = mixing_profile(m, joint_policy_of(uniform_factored_policy(m)), m_horizon, chain_of(m));
      std::ostringstream os;
      os << "k,gap\n";
      for (const auto& [k, gap] : mp.decay_curve) os << k << ',' << format_double(gap) << '\n';
      emit(m_out, os.str());
      std::cerr << "M1_hat " << format_double(mp.m1_hat) << " M2_hat " << format_double(mp.m2_hat) << " sigma "
                << format_double(mp.sigma) << " sigma_prime " << format_double(mp.sigma_prime) << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kValidation:
      case ErrorKind::kDimensionMismatch:
      case ErrorKind::kNotADistribution:
      case ErrorKind::kInvalidPartition:
      case ErrorKind::kIndex:
      case ErrorKind::kIo:
        return kExitValidation;
      default:
        return kExitSolver;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

#include "ilab/io.hpp"

#include <fstream>
#include <sstream>

namespace ilab {

namespace {

template <typename T>
T need(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

Json mdp_to_json(const FactoredMdp& mdp) {
  const MdpSpec& spec = mdp.spec();
  Json j;
  j["n"] = mdp.num_agents();
  j["local_state_sizes"] = spec.local_state_sizes;
  j["local_action_sizes"] = spec.local_action_sizes;
  j["gamma"] = spec.gamma;
  Json rewards = Json::array();
  for (const LocalReward& r : spec.rewards) {
    Json rows = Json::array();
    for (int s = 0; s < r.states; ++s) {
      Json row = Json::array();
      for (int a = 0; a < r.actions; ++a) {
        if (!r.next_state_dependent) {
          row.push_back(r(s, a, 0));
        } else {
          Json cell = Json::array();
          for (int t = 0; t < r.states; ++t) cell.push_back(r(s, a, t));
          row.push_back(std::move(cell));
        }
      }
      rows.push_back(std::move(row));
    }
    rewards.push_back(std::move(rows));
  }
  j["rewards"] = std::move(rewards);
  Json trans = Json::array();
  for (int a = 0; a < mdp.num_actions(); ++a) {
    Json block = Json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
      auto p = mdp.row(a, s);
      block.push_back(std::vector<double>(p.begin(), p.end()));
    }
    trans.push_back(std::move(block));
  }
  j["transition"] = std::move(trans);
  bool unit = true;
  for (double b : spec.reward_bounds) unit = unit && b == 1.0;
  if (!unit) j["reward_bounds"] = spec.reward_bounds;
  if (!spec.start_states.empty()) j["start_states"] = spec.start_states;
  return j;
}

MdpSpec mdp_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("mdp file must hold a JSON object");
  MdpSpec spec;
  const int n = need<int>(j, "n");
  spec.local_state_sizes = need<std::vector<int>>(j, "local_state_sizes");
  spec.local_action_sizes = need<std::vector<int>>(j, "local_action_sizes");
  spec.gamma = need<double>(j, "gamma");
  if (static_cast<int>(spec.local_state_sizes.size()) != n || static_cast<int>(spec.local_action_sizes.size()) != n)
    throw ValidationError("size lists disagree with n");

  const auto trans = need<std::vector<std::vector<std::vector<double>>>>(j, "transition");
  for (const auto& block : trans)
    for (const auto& row : block) spec.transition.insert(spec.transition.end(), row.begin(), row.end());
  long long S = 1, A = 1;
  for (int x : spec.local_state_sizes) S *= x;
  for (int x : spec.local_action_sizes) A *= x;
  if (static_cast<long long>(trans.size()) != A) throw ValidationError("transition has wrong number of actions");
  for (const auto& block : trans) {
    if (static_cast<long long>(block.size()) != S) throw ValidationError("transition block has wrong number of states");
    for (const auto& row : block)
      if (static_cast<long long>(row.size()) != S) throw ValidationError("transition row has wrong length");
  }

  if (!j.contains("rewards") || !j["rewards"].is_array()) throw ValidationError("missing key 'rewards'");
  const Json& rewards = j["rewards"];
  if (static_cast<int>(rewards.size()) != n) throw ValidationError("expected one reward table per agent");
  for (int i = 0; i < n; ++i) {
    const Json& r = rewards[i];
    const int Si = spec.local_state_sizes[i], Ai = spec.local_action_sizes[i];
    if (!r.is_array() || static_cast<int>(r.size()) != Si) throw ValidationError("reward table of agent " + std::to_string(i) + " has wrong shape");
    bool dynamic = false;
    if (Si > 0 && r[0].is_array() && !r[0].empty()) dynamic = r[0][0].is_array();
    std::vector<double> values;
    try {
      for (int s = 0; s < Si; ++s) {
        if (static_cast<int>(r[s].size()) != Ai) throw ValidationError("reward table of agent " + std::to_string(i) + " has wrong shape");
        for (int a = 0; a < Ai; ++a) {
          if (dynamic) {
            const auto cell = r[s][a].get<std::vector<double>>();
            if (static_cast<int>(cell.size()) != Si) throw ValidationError("reward table of agent " + std::to_string(i) + " has wrong shape");
            values.insert(values.end(), cell.begin(), cell.end());
          } else {
            values.push_back(r[s][a].get<double>());
          }
        }
      }
    } catch (const Json::exception& e) {
      throw ValidationError("reward table of agent " + std::to_string(i) + ": " + e.what());
    }
    spec.rewards.push_back(dynamic ? LocalReward::transition(Si, Ai, std::move(values))
                                   : LocalReward::state_action(Si, Ai, std::move(values)));
  }
  if (j.contains("reward_bounds")) spec.reward_bounds = need<std::vector<double>>(j, "reward_bounds");
  if (j.contains("start_states")) spec.start_states = need<std::vector<int>>(j, "start_states");
  return spec;
}

FactoredMdp mdp_from_json(const Json& j) { return FactoredMdp(mdp_spec_from_json(j)); }

Json kernel_to_json(const SeparableKernel& k) {
  Json j;
  j["state_sizes"] = std::vector<int>(k.state_sizes().begin(), k.state_sizes().end());
  j["action_sizes"] = std::vector<int>(k.action_sizes().begin(), k.action_sizes().end());
  Json agents = Json::array();
  for (int i = 0; i < k.num_agents(); ++i) {
    Json per_action = Json::array();
    for (int a = 0; a < k.action_sizes()[i]; ++a) {
      Json rows = Json::array();
      for (int s = 0; s < k.state_sizes()[i]; ++s) {
        auto r = k.row(i, a, s);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      per_action.push_back(std::move(rows));
    }
    agents.push_back(std::move(per_action));
  }
  j["kernels"] = std::move(agents);
  return j;
}

SeparableKernel kernel_from_json(const Json& j) {
  SeparableKernel k(need<std::vector<int>>(j, "state_sizes"), need<std::vector<int>>(j, "action_sizes"));
  const auto data = need<std::vector<std::vector<std::vector<std::vector<double>>>>>(j, "kernels");
  if (static_cast<int>(data.size()) != k.num_agents()) throw ValidationError("kernel file: agent count mismatch");
  for (int i = 0; i < k.num_agents(); ++i) {
    if (static_cast<int>(data[i].size()) != k.action_sizes()[i]) throw ValidationError("kernel file: action count mismatch");
    for (int a = 0; a < k.action_sizes()[i]; ++a) {
      if (static_cast<int>(data[i][a].size()) != k.state_sizes()[i]) throw ValidationError("kernel file: state count mismatch");
      for (int s = 0; s < k.state_sizes()[i]; ++s) {
        if (static_cast<int>(data[i][a][s].size()) != k.state_sizes()[i]) throw ValidationError("kernel file: row length mismatch");
        auto r = k.row(i, a, s);
        std::copy(data[i][a][s].begin(), data[i][a][s].end(), r.begin());
      }
    }
  }
  return k;
}

Json table_to_json(const Table& t) {
  Json rows = Json::array();
  for (int r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Json stationary_to_json(const StationaryDist& d) {
  Json j;
  j["d"] = table_to_json(d.d);
  j["sigma"] = d.sigma;
  j["sigma_prime"] = d.sigma_prime;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

FactoredMdp load_mdp(const std::string& path) { return mdp_from_json(read_json_file(path)); }

}  // namespace ilab

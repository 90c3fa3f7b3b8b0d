#pragma once

#include <json.hpp>
#include <string>

#include "ilab/dependence.hpp"
#include "ilab/mdp.hpp"
#include "ilab/solvers.hpp"

namespace ilab {

using Json = nlohmann::json;

// Keys: n, local_state_sizes, local_action_sizes, gamma, rewards, transition,
// and optionally reward_bounds and start_states. Each rewards[i] is either
// [s^i][a^i] or [s^i][a^i][s'^i].
Json mdp_to_json(const FactoredMdp& mdp);
MdpSpec mdp_spec_from_json(const Json& j);  // ValidationError on malformed input
FactoredMdp mdp_from_json(const Json& j);

Json kernel_to_json(const SeparableKernel& k);
SeparableKernel kernel_from_json(const Json& j);

Json table_to_json(const Table& t);
Json stationary_to_json(const StationaryDist& d);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
FactoredMdp load_mdp(const std::string& path);

}  // namespace ilab

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "driveline/coc.hpp"
#include "driveline/episode.hpp"
#include "driveline/meta.hpp"
#include "driveline/traj.hpp"

namespace driveline {

using Json = nlohmann::json;

// Repo-wide object schemas. Trajectories: {"dt":0.1,"v0":f,
// "waypoints":[[x,y,yaw],...]}; controls: {"dt":0.1,"controls":[[a,kappa],
// ...]}; tokens: {"tokens":[...]}; profiles: {"frames":[[lon,lat],...]}.
Json traj_to_json(const Trajectory& traj);
Trajectory traj_from_json(const Json& j, const char* context);

Json controls_to_json(const ControlSequence& controls);
ControlSequence controls_from_json(const Json& j, const char* context);

Json tokens_to_json(const std::vector<int>& tokens);
std::vector<int> tokens_from_json(const Json& j, const char* context);

Json profile_to_json(const MetaActionProfile& profile);
MetaActionProfile profile_from_json(const Json& j, const char* context);

Json box_to_json(const OrientedBox& box);
OrientedBox box_from_json(const Json& j, const char* context);

Json agent_to_json(const AgentBox& agent);
AgentBox agent_from_json(const Json& j, const char* context);

Json episode_to_json(const Episode& episode);
Episode episode_from_json(const Json& j, const char* context);

Json record_to_json(const CocRecord& rec);
CocRecord record_from_json(const Json& j, const char* context);

// One JSON document per line; blank lines are skipped.
std::vector<Json> read_jsonl(const std::string& path, const char* context);
void write_jsonl(const std::string& path, const std::vector<Json>& lines);

}  // namespace driveline

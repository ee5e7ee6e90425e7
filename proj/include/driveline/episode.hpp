#pragma once

#include <string>
#include <vector>

#include "driveline/geometry.hpp"
#include "driveline/traj.hpp"

namespace driveline {

enum class AgentClass { Vehicle, Pedestrian, Cyclist };

const char* to_string(AgentClass c);
AgentClass agent_class_from_string(const std::string& s);

struct AgentBox {
  OrientedBox box;
  AgentClass cls = AgentClass::Vehicle;
  int id = 0;  // stable across frames within an episode
};

// Replayed log segment: recorded ego motion, replayed agent boxes per frame,
// and the drivable area. Frame count equals the trajectory horizon.
struct Episode {
  std::string id;
  std::vector<std::string> tags;
  Trajectory ego;
  std::vector<std::vector<AgentBox>> agents;  // [frame][agent]
  std::vector<Vec2> drivable;
};

void validate(const Episode& episode, const char* context);

}  // namespace driveline

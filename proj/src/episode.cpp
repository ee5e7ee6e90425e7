#include "driveline/episode.hpp"

#include "driveline/errors.hpp"

namespace driveline {

const char* to_string(AgentClass c) {
  switch (c) {
    case AgentClass::Vehicle: return "vehicle";
    case AgentClass::Pedestrian: return "pedestrian";
    case AgentClass::Cyclist: return "cyclist";
  }
  return "vehicle";
}

AgentClass agent_class_from_string(const std::string& s) {
  if (s == "vehicle") return AgentClass::Vehicle;
  if (s == "pedestrian") return AgentClass::Pedestrian;
  if (s == "cyclist") return AgentClass::Cyclist;
  throw ValidationError("agent_class", "unknown agent class: " + s);
}

void validate(const Episode& episode, const char* context) {
  validate(episode.ego, context);
  if (episode.agents.size() != episode.ego.waypoints.size()) {
    throw ValidationError(context,
                          "agent frame count must equal the ego horizon");
  }
  validate_polygon(episode.drivable, context);
  for (const auto& frame : episode.agents) {
    for (const AgentBox& agent : frame) {
      validate(agent.box, context);
    }
  }
}

}  // namespace driveline

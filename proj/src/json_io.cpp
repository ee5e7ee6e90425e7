#include "driveline/json_io.hpp"

#include <fstream>

#include "driveline/errors.hpp"

namespace driveline {

namespace {

double num(const Json& j, const char* key, const char* context) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(context,
                          std::string("missing or non-numeric field: ") + key);
  }
  return j.at(key).get<double>();
}

}  // namespace

Json traj_to_json(const Trajectory& traj) {
  Json waypoints = Json::array();
  for (const Waypoint& w : traj.waypoints) {
    waypoints.push_back({w.x, w.y, w.yaw});
  }
  Json j = {{"dt", traj.dt}, {"v0", traj.v0}, {"waypoints", waypoints}};
  if (traj.reverse) j["reverse"] = true;
  return j;
}

Trajectory traj_from_json(const Json& j, const char* context) {
  Trajectory traj;
  traj.dt = num(j, "dt", context);
  traj.v0 = num(j, "v0", context);
  traj.reverse = j.value("reverse", false);
  if (!j.contains("waypoints") || !j.at("waypoints").is_array()) {
    throw ValidationError(context, "missing waypoints array");
  }
  for (const Json& w : j.at("waypoints")) {
    if (!w.is_array() || w.size() != 3) {
      throw ValidationError(context, "waypoint must be [x, y, yaw]");
    }
    traj.waypoints.push_back(
        {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
  }
  validate(traj, context);
  return traj;
}

Json controls_to_json(const ControlSequence& controls) {
  Json pairs = Json::array();
  for (const Control& u : controls.controls) {
    pairs.push_back({u.a, u.kappa});
  }
  return {{"dt", controls.dt}, {"controls", pairs}};
}

ControlSequence controls_from_json(const Json& j, const char* context) {
  ControlSequence out;
  out.dt = num(j, "dt", context);
  if (!j.contains("controls") || !j.at("controls").is_array()) {
    throw ValidationError(context, "missing controls array");
  }
  for (const Json& u : j.at("controls")) {
    if (!u.is_array() || u.size() != 2) {
      throw ValidationError(context, "control must be [a, kappa]");
    }
    out.controls.push_back({u[0].get<double>(), u[1].get<double>()});
  }
  return out;
}

Json tokens_to_json(const std::vector<int>& tokens) {
  return {{"tokens", tokens}};
}

std::vector<int> tokens_from_json(const Json& j, const char* context) {
  if (!j.contains("tokens") || !j.at("tokens").is_array()) {
    throw ValidationError(context, "missing tokens array");
  }
  std::vector<int> out;
  for (const Json& t : j.at("tokens")) {
    if (!t.is_number_integer()) {
      throw ValidationError(context, "tokens must be integers");
    }
    out.push_back(t.get<int>());
  }
  return out;
}

Json profile_to_json(const MetaActionProfile& profile) {
  Json frames = Json::array();
  for (const MetaAction& f : profile.frames) {
    frames.push_back({to_string(f.longitudinal), to_string(f.lateral)});
  }
  return {{"frames", frames}};
}

MetaActionProfile profile_from_json(const Json& j, const char* context) {
  if (!j.contains("frames") || !j.at("frames").is_array()) {
    throw ValidationError(context, "missing frames array");
  }
  MetaActionProfile profile;
  for (const Json& f : j.at("frames")) {
    if (!f.is_array() || f.size() != 2) {
      throw ValidationError(context, "frame must be [longitudinal, lateral]");
    }
    profile.frames.push_back(
        {lon_action_from_string(f[0].get<std::string>()),
         lat_action_from_string(f[1].get<std::string>())});
  }
  return profile;
}

Json box_to_json(const OrientedBox& box) {
  return {{"cx", box.cx},
          {"cy", box.cy},
          {"heading", box.heading},
          {"length", box.length},
          {"width", box.width}};
}

OrientedBox box_from_json(const Json& j, const char* context) {
  OrientedBox box;
  box.cx = num(j, "cx", context);
  box.cy = num(j, "cy", context);
  box.heading = num(j, "heading", context);
  box.length = num(j, "length", context);
  box.width = num(j, "width", context);
  validate(box, context);
  return box;
}

Json agent_to_json(const AgentBox& agent) {
  Json j = box_to_json(agent.box);
  j["cls"] = to_string(agent.cls);
  j["id"] = agent.id;
  return j;
}

AgentBox agent_from_json(const Json& j, const char* context) {
  AgentBox agent;
  agent.box = box_from_json(j, context);
  agent.cls = agent_class_from_string(j.value("cls", "vehicle"));
  agent.id = j.value("id", 0);
  return agent;
}

Json episode_to_json(const Episode& episode) {
  Json drivable = Json::array();
  for (const Vec2& p : episode.drivable) drivable.push_back({p.x, p.y});
  Json agents = Json::array();
  for (const auto& frame : episode.agents) {
    Json fj = Json::array();
    for (const AgentBox& a : frame) fj.push_back(agent_to_json(a));
    agents.push_back(fj);
  }
  return {{"id", episode.id},
          {"tags", episode.tags},
          {"ego", traj_to_json(episode.ego)},
          {"drivable", drivable},
          {"agents", agents}};
}

Episode episode_from_json(const Json& j, const char* context) {
  Episode episode;
  episode.id = j.value("id", "");
  if (j.contains("tags")) {
    for (const Json& t : j.at("tags")) {
      episode.tags.push_back(t.get<std::string>());
    }
  }
  if (!j.contains("ego")) {
    throw ValidationError(context, "episode needs an ego trajectory");
  }
  episode.ego = traj_from_json(j.at("ego"), context);
  if (!j.contains("drivable") || !j.at("drivable").is_array()) {
    throw ValidationError(context, "episode needs a drivable polygon");
  }
  for (const Json& p : j.at("drivable")) {
    if (!p.is_array() || p.size() != 2) {
      throw ValidationError(context, "polygon vertex must be [x, y]");
    }
    episode.drivable.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (!j.contains("agents") || !j.at("agents").is_array()) {
    throw ValidationError(context, "episode needs per-frame agents");
  }
  for (const Json& frame : j.at("agents")) {
    std::vector<AgentBox> boxes;
    for (const Json& a : frame) boxes.push_back(agent_from_json(a, context));
    episode.agents.push_back(std::move(boxes));
  }
  validate(episode, context);
  return episode;
}

Json record_to_json(const CocRecord& rec) {
  Json decision = {{"longitudinal", nullptr},
                   {"lateral", nullptr},
                   {"side", nullptr}};
  if (rec.decision.longitudinal) {
    decision["longitudinal"] = to_string(*rec.decision.longitudinal);
  }
  if (rec.decision.lateral) {
    decision["lateral"] = to_string(*rec.decision.lateral);
  }
  if (rec.decision.side) decision["side"] = to_string(*rec.decision.side);

  Json components = Json::array();
  for (const CriticalComponent& c : rec.components) {
    Json cj = {{"category", to_string(c.category)},
               {"attributes", c.attributes},
               {"uncertainty", nullptr},
               {"observed_frame", c.observed_frame}};
    if (c.uncertainty) cj["uncertainty"] = to_string(*c.uncertainty);
    components.push_back(cj);
  }
  return {{"decision", decision},
          {"components", components},
          {"trace", rec.trace},
          {"keyframe", rec.keyframe},
          {"scenario", rec.scenario}};
}

CocRecord record_from_json(const Json& j, const char* context) {
  CocRecord rec;
  try {
    if (j.contains("decision")) {
      const Json& d = j.at("decision");
      if (d.contains("longitudinal") && !d.at("longitudinal").is_null()) {
        rec.decision.longitudinal =
            lon_decision_from_string(d.at("longitudinal").get<std::string>());
      }
      if (d.contains("lateral") && !d.at("lateral").is_null()) {
        rec.decision.lateral =
            lat_decision_from_string(d.at("lateral").get<std::string>());
      }
      if (d.contains("side") && !d.at("side").is_null()) {
        rec.decision.side = side_from_string(d.at("side").get<std::string>());
      }
    }
    if (j.contains("components")) {
      for (const Json& cj : j.at("components")) {
        CriticalComponent c;
        c.category = component_category_from_string(
            cj.at("category").get<std::string>());
        if (cj.contains("attributes")) {
          for (auto it = cj.at("attributes").begin();
               it != cj.at("attributes").end(); ++it) {
            c.attributes[it.key()] = it.value().get<std::string>();
          }
        }
        if (cj.contains("uncertainty") && !cj.at("uncertainty").is_null()) {
          c.uncertainty =
              uncertainty_from_string(cj.at("uncertainty").get<std::string>());
        }
        c.observed_frame = cj.value("observed_frame", 0);
        rec.components.push_back(std::move(c));
      }
    }
    rec.trace = j.value("trace", "");
    rec.keyframe = j.value("keyframe", 0);
    rec.scenario = j.value("scenario", "");
  } catch (const Json::exception& e) {
    throw ValidationError(context, std::string("malformed record: ") +
                                       e.what());
  }
  return rec;
}

std::vector<Json> read_jsonl(const std::string& path, const char* context) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(context, "cannot open " + path);
  }
  std::vector<Json> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw ValidationError(context, path + ":" + std::to_string(lineno) +
                                         ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<Json>& lines) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("write_jsonl", "cannot open " + path);
  }
  for (const Json& j : lines) {
    out << j.dump() << "\n";
  }
}

}  // namespace driveline

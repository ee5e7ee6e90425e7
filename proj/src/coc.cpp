#include "driveline/coc.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "driveline/errors.hpp"

namespace driveline {

const char* to_string(LonDecision d) {
  switch (d) {
    case LonDecision::SetSpeedTracking: return "set_speed_tracking";
    case LonDecision::LeadObstacleFollowing: return "lead_obstacle_following";
    case LonDecision::SpeedAdaptation: return "speed_adaptation";
    case LonDecision::GapSearching: return "gap_searching";
    case LonDecision::AccelerationForPassing: return "acceleration_for_passing";
    case LonDecision::Yield: return "yield";
    case LonDecision::StopForStaticConstraints:
      return "stop_for_static_constraints";
  }
  return "set_speed_tracking";
}

const char* to_string(LatDecision d) {
  switch (d) {
    case LatDecision::LaneKeeping: return "lane_keeping";
    case LatDecision::MergeSplit: return "merge_split";
    case LatDecision::OutOfLaneNudge: return "out_of_lane_nudge";
    case LatDecision::InLaneNudge: return "in_lane_nudge";
    case LatDecision::LaneChange: return "lane_change";
    case LatDecision::PullOver: return "pull_over";
    case LatDecision::Turn: return "turn";
    case LatDecision::LateralManeuverAbort: return "lateral_maneuver_abort";
  }
  return "lane_keeping";
}

const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

const char* to_string(ComponentCategory c) {
  switch (c) {
    case ComponentCategory::CriticalObjects: return "critical_objects";
    case ComponentCategory::TrafficLights: return "traffic_lights";
    case ComponentCategory::YieldStopControl: return "yield_stop_control";
    case ComponentCategory::RoadEvents: return "road_events";
    case ComponentCategory::LaneLanelines: return "lane_lanelines";
    case ComponentCategory::RoutingIntent: return "routing_intent";
    case ComponentCategory::OddConstraints: return "odd_constraints";
  }
  return "critical_objects";
}

const char* to_string(Uncertainty u) {
  return u == Uncertainty::Low ? "low" : "high";
}

const char* to_string(LonIntent i) {
  switch (i) {
    case LonIntent::Accelerate: return "accelerate";
    case LonIntent::Decelerate: return "decelerate";
    case LonIntent::Stop: return "stop";
    case LonIntent::MaintainSpeed: return "maintain_speed";
    case LonIntent::Reverse: return "reverse";
    case LonIntent::Unknown: return "unknown";
  }
  return "unknown";
}

const char* to_string(LatIntent i) {
  switch (i) {
    case LatIntent::Left: return "left";
    case LatIntent::Right: return "right";
    case LatIntent::Straight: return "straight";
    case LatIntent::Unknown: return "unknown";
  }
  return "unknown";
}

const char* to_string(Violation v) {
  switch (v) {
    case Violation::DecisionGrounding: return "DecisionGrounding";
    case Violation::CausalCoverage: return "CausalCoverage";
    case Violation::DecisionMinimality: return "DecisionMinimality";
    case Violation::CausalLocality: return "CausalLocality";
    case Violation::SidePresence: return "SidePresence";
    case Violation::UncertaintyScope: return "UncertaintyScope";
  }
  return "DecisionGrounding";
}

std::vector<LonDecision> all_lon_decisions() {
  return {LonDecision::SetSpeedTracking, LonDecision::LeadObstacleFollowing,
          LonDecision::SpeedAdaptation, LonDecision::GapSearching,
          LonDecision::AccelerationForPassing, LonDecision::Yield,
          LonDecision::StopForStaticConstraints};
}

std::vector<LatDecision> all_lat_decisions() {
  return {LatDecision::LaneKeeping,  LatDecision::MergeSplit,
          LatDecision::OutOfLaneNudge, LatDecision::InLaneNudge,
          LatDecision::LaneChange,   LatDecision::PullOver,
          LatDecision::Turn,         LatDecision::LateralManeuverAbort};
}

namespace {

template <typename Enum, typename List>
Enum enum_from_string(const std::string& s, const List& values,
                      const char* what) {
  for (Enum v : values) {
    if (s == to_string(v)) return v;
  }
  throw ValidationError(what, "unknown value: " + s);
}

}  // namespace

LonDecision lon_decision_from_string(const std::string& s) {
  return enum_from_string<LonDecision>(s, all_lon_decisions(), "lon_decision");
}

LatDecision lat_decision_from_string(const std::string& s) {
  return enum_from_string<LatDecision>(s, all_lat_decisions(), "lat_decision");
}

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw ValidationError("side", "unknown side: " + s);
}

ComponentCategory component_category_from_string(const std::string& s) {
  return enum_from_string<ComponentCategory>(
      s,
      std::vector<ComponentCategory>{
          ComponentCategory::CriticalObjects, ComponentCategory::TrafficLights,
          ComponentCategory::YieldStopControl, ComponentCategory::RoadEvents,
          ComponentCategory::LaneLanelines, ComponentCategory::RoutingIntent,
          ComponentCategory::OddConstraints},
      "component_category");
}

Uncertainty uncertainty_from_string(const std::string& s) {
  if (s == "low") return Uncertainty::Low;
  if (s == "high") return Uncertainty::High;
  throw ValidationError("uncertainty", "unknown uncertainty: " + s);
}

bool side_required(LatDecision d) {
  switch (d) {
    case LatDecision::OutOfLaneNudge:
    case LatDecision::InLaneNudge:
    case LatDecision::LaneChange:
    case LatDecision::Turn:
      return true;
    default:
      return false;
  }
}

bool side_allowed(LatDecision d) {
  return side_required(d) || d == LatDecision::MergeSplit;
}

std::string noun_phrase(const CriticalComponent& component) {
  auto it = component.attributes.find("phrase");
  if (it != component.attributes.end() && !it->second.empty()) {
    return it->second;
  }
  switch (component.category) {
    case ComponentCategory::CriticalObjects: return "a critical object nearby";
    case ComponentCategory::TrafficLights: return "the traffic light state";
    case ComponentCategory::YieldStopControl: return "the posted stop control";
    case ComponentCategory::RoadEvents: return "the road layout ahead";
    case ComponentCategory::LaneLanelines: return "the lane markings";
    case ComponentCategory::RoutingIntent: return "the planned route";
    case ComponentCategory::OddConstraints: return "the operating conditions";
  }
  return "a critical object nearby";
}

int projection_table_version() { return 1; }

namespace {

// Signed speed_delta attribute, if any component carries one.
std::optional<double> speed_delta(
    const std::vector<CriticalComponent>& components) {
  for (const CriticalComponent& c : components) {
    auto it = c.attributes.find("speed_delta");
    if (it == c.attributes.end()) continue;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end != it->second.c_str()) return v;
  }
  return std::nullopt;
}

LatIntent side_intent(const DrivingDecision& d) {
  if (!d.side) return LatIntent::Unknown;
  return *d.side == Side::Left ? LatIntent::Left : LatIntent::Right;
}

}  // namespace

ParsedIntent project_intent(const DrivingDecision& decision,
                            const std::vector<CriticalComponent>& components) {
  ParsedIntent out;
  if (decision.longitudinal) {
    switch (*decision.longitudinal) {
      case LonDecision::SetSpeedTracking: {
        const auto delta = speed_delta(components);
        if (delta && *delta > 0.0) {
          out.longitudinal = LonIntent::Accelerate;
        } else if (delta && *delta < 0.0) {
          out.longitudinal = LonIntent::Decelerate;
        } else {
          out.longitudinal = LonIntent::MaintainSpeed;
        }
        break;
      }
      case LonDecision::LeadObstacleFollowing:
        out.longitudinal = LonIntent::MaintainSpeed;
        break;
      case LonDecision::SpeedAdaptation:
      case LonDecision::GapSearching:
      case LonDecision::Yield:
        out.longitudinal = LonIntent::Decelerate;
        break;
      case LonDecision::AccelerationForPassing:
        out.longitudinal = LonIntent::Accelerate;
        break;
      case LonDecision::StopForStaticConstraints:
        out.longitudinal = LonIntent::Stop;
        break;
    }
  }
  if (decision.lateral) {
    switch (*decision.lateral) {
      case LatDecision::LaneKeeping:
      case LatDecision::LateralManeuverAbort:
        out.lateral = LatIntent::Straight;
        break;
      case LatDecision::MergeSplit:
      case LatDecision::OutOfLaneNudge:
      case LatDecision::InLaneNudge:
      case LatDecision::LaneChange:
      case LatDecision::Turn:
        out.lateral = side_intent(decision);
        break;
      case LatDecision::PullOver:
        out.lateral = LatIntent::Right;
        break;
    }
  }
  return out;
}

ParsedIntent project_intent(const DrivingDecision& decision) {
  return project_intent(decision, {});
}

namespace {

std::string lon_clause(LonDecision d, const std::optional<double>& delta) {
  switch (d) {
    case LonDecision::SetSpeedTracking:
      if (delta && *delta > 0.0) return "accelerating to the set speed";
      if (delta && *delta < 0.0) return "slowing to the set speed";
      return "maintaining the set speed";
    case LonDecision::LeadObstacleFollowing:
      return "following the lead vehicle at a steady gap";
    case LonDecision::SpeedAdaptation: return "slowing for the road layout";
    case LonDecision::GapSearching: return "slowing to open a gap";
    case LonDecision::AccelerationForPassing: return "accelerating to pass";
    case LonDecision::Yield: return "yielding";
    case LonDecision::StopForStaticConstraints: return "stopping";
  }
  return "";
}

std::string lat_clause(LatDecision d, const std::optional<Side>& side) {
  const std::string dir =
      side ? (*side == Side::Left ? "left" : "right") : "";
  switch (d) {
    case LatDecision::LaneKeeping: return "keeping the lane";
    case LatDecision::MergeSplit:
      return side ? "merging to the " + dir : "merging with the adjacent stream";
    case LatDecision::OutOfLaneNudge:
      return "nudging out of the lane to the " + dir;
    case LatDecision::InLaneNudge:
      return "nudging to the " + dir + " within the lane";
    case LatDecision::LaneChange: return "changing lane to the " + dir;
    case LatDecision::PullOver: return "pulling over to the curb";
    case LatDecision::Turn: return "turning " + dir;
    case LatDecision::LateralManeuverAbort:
      return "aborting the lateral maneuver and re-centering";
  }
  return "";
}

}  // namespace

std::string compose_trace(const DrivingDecision& decision,
                          const std::vector<CriticalComponent>& components,
                          std::mt19937_64& rng) {
  if (decision.none()) {
    if (!components.empty()) {
      throw ValidationError("compose_trace",
                            "components without a decision to ground them");
    }
    return "";
  }
  if (decision.lateral && side_required(*decision.lateral) && !decision.side) {
    throw ValidationError("compose_trace",
                          std::string(to_string(*decision.lateral)) +
                              " requires a side");
  }

  std::string clause;
  if (decision.longitudinal) {
    clause = lon_clause(*decision.longitudinal, speed_delta(components));
  }
  if (decision.lateral) {
    const std::string lat = lat_clause(*decision.lateral, decision.side);
    clause = clause.empty() ? lat : clause + " and " + lat;
  }

  std::string causes;
  for (size_t i = 0; i < components.size(); ++i) {
    if (i > 0) causes += " and ";
    causes += noun_phrase(components[i]);
  }

  if (causes.empty()) return clause;
  // The seed only selects the clause order (template family A or B).
  const bool cause_first = (rng() & 1u) != 0;
  if (cause_first) return "because " + causes + ", " + clause;
  return clause + " because " + causes;
}

namespace {

struct Stem {
  const char* text;
  int channel;  // 0 = longitudinal, 1 = lateral
  LonIntent lon;
  LatIntent lat;
};

// Compact verb lexicon; matching is longest-stem-first, case-insensitive.
const Stem kLexicon[] = {
    // longitudinal: accelerate
    {"accelerating", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"accelerates", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"accelerate", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"speeding up", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"speed up", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"resuming", 0, LonIntent::Accelerate, LatIntent::Unknown},
    {"resume", 0, LonIntent::Accelerate, LatIntent::Unknown},
    // longitudinal: decelerate
    {"decelerating", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"decelerates", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"decelerate", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"slowing", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"slows down", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"slow down", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"braking", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"yielding", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"yields to", 0, LonIntent::Decelerate, LatIntent::Unknown},
    {"yield to", 0, LonIntent::Decelerate, LatIntent::Unknown},
    // longitudinal: stop
    {"coming to a stop", 0, LonIntent::Stop, LatIntent::Unknown},
    {"come to a stop", 0, LonIntent::Stop, LatIntent::Unknown},
    {"to a stop", 0, LonIntent::Stop, LatIntent::Unknown},
    {"stopping", 0, LonIntent::Stop, LatIntent::Unknown},
    {"stop for", 0, LonIntent::Stop, LatIntent::Unknown},
    {"stops for", 0, LonIntent::Stop, LatIntent::Unknown},
    {"halting", 0, LonIntent::Stop, LatIntent::Unknown},
    {"to stop", 0, LonIntent::Stop, LatIntent::Unknown},
    // longitudinal: maintain
    {"maintaining the set speed", 0, LonIntent::MaintainSpeed,
     LatIntent::Unknown},
    {"maintaining speed", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"maintain speed", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"keeping speed", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"steady speed", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"constant speed", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"following the lead", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"follow the lead", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    {"cruising", 0, LonIntent::MaintainSpeed, LatIntent::Unknown},
    // longitudinal: reverse
    {"reversing", 0, LonIntent::Reverse, LatIntent::Unknown},
    {"reverse", 0, LonIntent::Reverse, LatIntent::Unknown},
    {"backing up", 0, LonIntent::Reverse, LatIntent::Unknown},
    {"back up", 0, LonIntent::Reverse, LatIntent::Unknown},
    // lateral: left
    {"to the left", 1, LonIntent::Unknown, LatIntent::Left},
    {"turning left", 1, LonIntent::Unknown, LatIntent::Left},
    {"turn left", 1, LonIntent::Unknown, LatIntent::Left},
    {"left turn", 1, LonIntent::Unknown, LatIntent::Left},
    {"steering left", 1, LonIntent::Unknown, LatIntent::Left},
    {"steer left", 1, LonIntent::Unknown, LatIntent::Left},
    {"nudging left", 1, LonIntent::Unknown, LatIntent::Left},
    {"merging left", 1, LonIntent::Unknown, LatIntent::Left},
    // lateral: right
    {"to the right", 1, LonIntent::Unknown, LatIntent::Right},
    {"turning right", 1, LonIntent::Unknown, LatIntent::Right},
    {"turn right", 1, LonIntent::Unknown, LatIntent::Right},
    {"right turn", 1, LonIntent::Unknown, LatIntent::Right},
    {"steering right", 1, LonIntent::Unknown, LatIntent::Right},
    {"steer right", 1, LonIntent::Unknown, LatIntent::Right},
    {"nudging right", 1, LonIntent::Unknown, LatIntent::Right},
    {"merging right", 1, LonIntent::Unknown, LatIntent::Right},
    {"pulling over", 1, LonIntent::Unknown, LatIntent::Right},
    {"pull over", 1, LonIntent::Unknown, LatIntent::Right},
    // lateral: straight
    {"keeping the lane", 1, LonIntent::Unknown, LatIntent::Straight},
    {"keep the lane", 1, LonIntent::Unknown, LatIntent::Straight},
    {"keeping lane", 1, LonIntent::Unknown, LatIntent::Straight},
    {"lane keeping", 1, LonIntent::Unknown, LatIntent::Straight},
    {"going straight", 1, LonIntent::Unknown, LatIntent::Straight},
    {"go straight", 1, LonIntent::Unknown, LatIntent::Straight},
    {"straight ahead", 1, LonIntent::Unknown, LatIntent::Straight},
    {"re-centering", 1, LonIntent::Unknown, LatIntent::Straight},
    {"re-center", 1, LonIntent::Unknown, LatIntent::Straight},
    {"recentering", 1, LonIntent::Unknown, LatIntent::Straight},
};

const char* kNegators[] = {"not", "no", "never", "without", "avoid"};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool boundary_ok(const std::string& text, size_t pos, size_t len) {
  if (pos > 0 && is_word_char(text[pos - 1])) return false;
  const size_t end = pos + len;
  if (end < text.size() && is_word_char(text[end])) return false;
  return true;
}

// A negator within the three words preceding `pos` suppresses the match.
bool negated(const std::string& text, size_t pos) {
  size_t i = pos;
  for (int words = 0; words < 3 && i > 0;) {
    size_t end = i;
    while (end > 0 && !is_word_char(text[end - 1])) --end;
    if (end == 0) break;
    size_t start = end;
    while (start > 0 && is_word_char(text[start - 1])) --start;
    const std::string word = text.substr(start, end - start);
    for (const char* neg : kNegators) {
      if (word == neg) return true;
    }
    i = start;
    ++words;
  }
  return false;
}

struct Match {
  size_t pos;
  size_t len;
  int channel;
  LonIntent lon;
  LatIntent lat;
};

}  // namespace

ParsedIntent parse_intent(const std::string& trace) {
  std::string text = trace;
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });

  std::vector<const Stem*> stems;
  for (const Stem& s : kLexicon) stems.push_back(&s);
  std::stable_sort(stems.begin(), stems.end(),
                   [](const Stem* a, const Stem* b) {
                     return std::char_traits<char>::length(a->text) >
                            std::char_traits<char>::length(b->text);
                   });

  std::vector<Match> matches;
  for (const Stem* stem : stems) {
    const std::string needle = stem->text;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      const size_t here = pos;
      pos += 1;
      if (!boundary_ok(text, here, needle.size())) continue;
      if (negated(text, here)) continue;
      // Longer stems were matched first; skip spans they already cover.
      bool covered = false;
      for (const Match& m : matches) {
        if (m.channel == stem->channel && here >= m.pos &&
            here + needle.size() <= m.pos + m.len) {
          covered = true;
          break;
        }
      }
      if (covered) continue;
      matches.push_back({here, needle.size(), stem->channel, stem->lon,
                         stem->lat});
    }
  }

  ParsedIntent out;
  for (int channel = 0; channel < 2; ++channel) {
    const Match* best = nullptr;
    for (const Match& m : matches) {
      if (m.channel != channel) continue;
      if (best == nullptr || m.pos > best->pos ||
          (m.pos == best->pos && m.len > best->len)) {
        best = &m;
      }
    }
    if (best == nullptr) continue;
    if (channel == 0) {
      out.longitudinal = best->lon;
    } else {
      out.lateral = best->lat;
    }
  }
  return out;
}

const std::vector<std::string>& lexicon_stem_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    for (const Stem& s : kLexicon) {
      std::string word;
      for (const char* p = s.text;; ++p) {
        if (*p != '\0' && is_word_char(*p)) {
          word += *p;
          continue;
        }
        if (!word.empty() &&
            std::find(out.begin(), out.end(), word) == out.end()) {
          out.push_back(word);
        }
        word.clear();
        if (*p == '\0') break;
      }
    }
    return out;
  }();
  return words;
}

std::vector<Violation> validate_record(const CocRecord& rec) {
  std::vector<Violation> out;
  const bool has_decision = !rec.decision.none();
  if (has_decision && rec.trace.empty()) {
    out.push_back(Violation::DecisionGrounding);
  }
  if (has_decision && rec.components.empty()) {
    out.push_back(Violation::CausalCoverage);
  }
  if (!has_decision && !rec.components.empty()) {
    out.push_back(Violation::DecisionMinimality);
  }
  for (const CriticalComponent& c : rec.components) {
    if (c.observed_frame > rec.keyframe) {
      out.push_back(Violation::CausalLocality);
      break;
    }
  }
  if (rec.decision.lateral) {
    const LatDecision lat = *rec.decision.lateral;
    if (side_required(lat) && !rec.decision.side) {
      out.push_back(Violation::SidePresence);
    } else if (rec.decision.side && !side_allowed(lat)) {
      out.push_back(Violation::SidePresence);
    }
  } else if (rec.decision.side) {
    out.push_back(Violation::SidePresence);
  }
  for (const CriticalComponent& c : rec.components) {
    if (c.uncertainty && c.category != ComponentCategory::CriticalObjects) {
      out.push_back(Violation::UncertaintyScope);
      break;
    }
  }
  return out;
}

}  // namespace driveline

#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace driveline {

// Closed-set high-level driving decisions, one per channel (or none).
enum class LonDecision {
  SetSpeedTracking,
  LeadObstacleFollowing,
  SpeedAdaptation,
  GapSearching,
  AccelerationForPassing,
  Yield,
  StopForStaticConstraints,
};

enum class LatDecision {
  LaneKeeping,
  MergeSplit,
  OutOfLaneNudge,
  InLaneNudge,
  LaneChange,
  PullOver,
  Turn,
  LateralManeuverAbort,
};

enum class Side { Left, Right };

struct DrivingDecision {
  std::optional<LonDecision> longitudinal;
  std::optional<LatDecision> lateral;
  std::optional<Side> side;

  bool none() const { return !longitudinal && !lateral; }
  bool operator==(const DrivingDecision& o) const = default;
};

// True when the lateral item must carry a side; MergeSplit may carry one.
bool side_required(LatDecision d);
bool side_allowed(LatDecision d);

enum class ComponentCategory {
  CriticalObjects,
  TrafficLights,
  YieldStopControl,
  RoadEvents,
  LaneLanelines,
  RoutingIntent,
  OddConstraints,
};

enum class Uncertainty { Low, High };

struct CriticalComponent {
  ComponentCategory category = ComponentCategory::CriticalObjects;
  std::map<std::string, std::string> attributes;
  std::optional<Uncertainty> uncertainty;  // CriticalObjects only
  int observed_frame = 0;
};

// How the component is referenced inside a composed trace: the "phrase"
// attribute verbatim when present, a category default otherwise.
std::string noun_phrase(const CriticalComponent& component);

struct CocRecord {
  DrivingDecision decision;
  std::vector<CriticalComponent> components;
  std::string trace;
  int keyframe = 0;
  std::string scenario;
};

enum class LonIntent { Accelerate, Decelerate, Stop, MaintainSpeed, Reverse,
                       Unknown };
enum class LatIntent { Left, Right, Straight, Unknown };

struct ParsedIntent {
  LonIntent longitudinal = LonIntent::Unknown;
  LatIntent lateral = LatIntent::Unknown;
  bool operator==(const ParsedIntent& o) const = default;
};

// Decision -> channel intent projection table (versioned; see
// projection_table_version). SetSpeedTracking consults a signed
// "speed_delta" attribute on the components when given.
ParsedIntent project_intent(const DrivingDecision& decision);
ParsedIntent project_intent(const DrivingDecision& decision,
                            const std::vector<CriticalComponent>& components);
int projection_table_version();

// Renders decision + components into a trace with one verb phrase per
// decision; the seed only selects the clause order, never the wording.
std::string compose_trace(const DrivingDecision& decision,
                          const std::vector<CriticalComponent>& components,
                          std::mt19937_64& rng);

// Rule-based intent extraction: longest-stem-first over a fixed lexicon with
// word boundaries and negation handling; per channel the latest match wins.
// Unrecognized text yields Unknown.
ParsedIntent parse_intent(const std::string& trace);

// Every word that appears in a lexicon stem; the mock judge removes these
// before comparing causal content between traces.
const std::vector<std::string>& lexicon_stem_words();

enum class Violation {
  DecisionGrounding,   // non-None decision with an empty trace
  CausalCoverage,      // non-None decision with no components
  DecisionMinimality,  // None decision with components
  CausalLocality,      // component observed after the keyframe
  SidePresence,        // side missing where required or set where forbidden
  UncertaintyScope,    // uncertainty outside CriticalObjects
};

const char* to_string(Violation v);

std::vector<Violation> validate_record(const CocRecord& rec);

// String forms used by the JSON schema; round-trips are exact.
const char* to_string(LonDecision d);
const char* to_string(LatDecision d);
const char* to_string(Side s);
const char* to_string(ComponentCategory c);
const char* to_string(Uncertainty u);
const char* to_string(LonIntent i);
const char* to_string(LatIntent i);
LonDecision lon_decision_from_string(const std::string& s);
LatDecision lat_decision_from_string(const std::string& s);
Side side_from_string(const std::string& s);
ComponentCategory component_category_from_string(const std::string& s);
Uncertainty uncertainty_from_string(const std::string& s);

std::vector<LonDecision> all_lon_decisions();
std::vector<LatDecision> all_lat_decisions();

}  // namespace driveline

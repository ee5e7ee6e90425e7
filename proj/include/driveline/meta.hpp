#pragma once

#include <string>
#include <vector>

#include "driveline/episode.hpp"
#include "driveline/traj.hpp"

namespace driveline {

enum class LonAction {
  GentleAccelerate,
  StrongAccelerate,
  GentleDecelerate,
  StrongDecelerate,
  MaintainSpeed,
  Stop,
  Reverse,
};

enum class LatAction {
  SteerLeft,
  SteerRight,
  SharpSteerLeft,
  SharpSteerRight,
  GoStraight,
  ReverseLeft,
  ReverseRight,
};

const char* to_string(LonAction a);
const char* to_string(LatAction a);
LonAction lon_action_from_string(const std::string& s);
LatAction lat_action_from_string(const std::string& s);

struct MetaAction {
  LonAction longitudinal = LonAction::MaintainSpeed;
  LatAction lateral = LatAction::GoStraight;
  bool operator==(const MetaAction& o) const = default;
};

struct DetectorConfig {
  double a_gentle = 0.3;     // m/s^2
  double a_strong = 2.0;     // m/s^2
  double v_stop = 0.1;       // m/s
  double kappa_steer = 0.02; // 1/m
  double kappa_sharp = 0.1;  // 1/m
  int hysteresis_frames = 3;
};

void validate(const DetectorConfig& cfg, const char* context);

struct MetaActionProfile {
  std::vector<MetaAction> frames;  // one label pair per input frame
  DetectorConfig thresholds;       // snapshot of the config used
};

// Per-frame classification from (speed, acceleration, curvature) with the
// debounce: a new label commits only once it persists for hysteresis_frames
// (or reaches the end of the sequence). Positive curvature steers left.
MetaActionProfile detect_meta_actions(const Trajectory& traj,
                                      const ControlSequence& controls,
                                      const DetectorConfig& cfg);

// Frames where either channel differs from the previous frame; a frame with
// both channels changing appears once.
std::vector<int> transition_frames(const MetaActionProfile& profile);

struct KeyframeResult {
  int frame = 0;
  bool clamped = false;  // transition fell inside the history window
};

// max(transition - round(buffer_s * 10), history_frames).
KeyframeResult select_keyframe(int transition_frame, int history_frames,
                               double buffer_s);

// Geometry thresholds for scenario tagging; the lane/corridor values are not
// part of the kinematic detector config.
struct ScenarioConfig {
  double corridor_half_width = 1.75;  // m
  double corridor_length = 30.0;      // m lookahead for lead/cut-in checks
  double half_lane_width = 1.75;      // m, ego off-center crossing threshold
  double off_center_eps = 0.3;        // m, "starts to move off-center"
  int history_frames = 20;            // 2 s at 10 Hz
  double keyframe_buffer_s = 0.5;
  int sustain_frames = 10;            // proactive interval persistence
  FitConfig fit;
};

struct ScenarioTag {
  std::string tag;  // slow-for-lead, stop-for-lead, lane-change, cut-in,
                    // yield-to-vru
  int keyframe = 0;
  bool clamped = false;
};

struct ScenarioRange {
  std::string tag;  // curvy-road, lane-change-preparation
  int range_start = 0;
  int range_end = 0;
};

std::vector<ScenarioTag> tag_reactive_scenarios(const Episode& episode,
                                                const DetectorConfig& cfg,
                                                const ScenarioConfig& scen = {});

std::vector<ScenarioRange> tag_proactive_scenarios(
    const Episode& episode, const DetectorConfig& cfg,
    const ScenarioConfig& scen = {});

}  // namespace driveline

#pragma once

#include <string>
#include <vector>

#include "driveline/coc.hpp"
#include "driveline/episode.hpp"
#include "driveline/geometry.hpp"
#include "driveline/judge.hpp"
#include "driveline/meta.hpp"
#include "driveline/traj.hpp"

namespace driveline {

// Penalty weights for the trajectory-quality term. The reward is the
// negated penalty sum when negated_penalty is set (the default), so larger
// is better and collisions hurt.
struct RewardWeights {
  double lambda_l2 = 1.0;
  double lambda_coll = 10.0;
  double lambda_jerk = 0.01;
  bool negated_penalty = true;
};

struct RewardConfig {
  RewardWeights weights;
  double judge_weight = 0.2;
  double consistency_weight = 1.0;
  double ego_length = 4.8;  // m
  double ego_width = 2.0;   // m
  int consistency_window = 30;     // frames after the keyframe
  int stop_override_frames = 10;   // Stop dominates when present this long
  FitConfig fit;
  DetectorConfig detector;
};

struct RewardBreakdown {
  int r_reason = 0;        // 0..5 rubric score
  int r_consistency = 0;   // {0, 1}
  double r_traj = 0.0;
  double total = 0.0;
};

// 1 iff the parsed intent matches the dominant post-keyframe meta action on
// both axes; Unknown on either axis is conservatively 0. The dominant
// longitudinal label is the window majority, except Stop wins outright once
// present for stop_override_frames.
int consistency_reward(const ParsedIntent& intent,
                       const MetaActionProfile& profile, int window_start = 0,
                       int window_len = 30, int stop_override_frames = 10);

// Per-axis compatibility tables behind consistency_reward.
bool lon_intent_matches(LonIntent intent, LonAction dominant);
bool lat_intent_matches(LatIntent intent, LatAction dominant);

// 1 iff the ego box, posed at each waypoint, overlaps any agent box on any
// frame (separating-axis test).
int collision_indicator(const Trajectory& ego_traj, const OrientedBox& ego_box,
                        const std::vector<std::vector<AgentBox>>& agents);

// -(lambda_L2 * mean squared waypoint distance
//   + lambda_coll * collision indicator
//   + lambda_jerk * mean squared jerk of the fitted controls).
// `initial` anchors the jerk fit; it must be transformed together with the
// trajectories for rigid-motion comparisons.
double traj_quality(const Trajectory& pred, const Trajectory& expert,
                    const std::vector<std::vector<AgentBox>>& agents,
                    const RewardWeights& weights,
                    const RewardConfig& cfg = {});
double traj_quality(const Trajectory& pred, const Trajectory& expert,
                    const std::vector<std::vector<AgentBox>>& agents,
                    const RewardWeights& weights, const RewardConfig& cfg,
                    const EgoState& initial);

struct RewardRollout {
  std::string trace;
  Trajectory trajectory;
};

struct RewardReference {
  std::string trace;
  Trajectory expert;
};

RewardBreakdown total_reward(const RewardRollout& rollout,
                             const RewardReference& gt,
                             const std::vector<std::vector<AgentBox>>& agents,
                             const RewardConfig& cfg, Judge& judge);

}  // namespace driveline

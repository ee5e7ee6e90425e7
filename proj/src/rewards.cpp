#include "driveline/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "driveline/errors.hpp"

namespace driveline {

bool lon_intent_matches(LonIntent intent, LonAction dominant) {
  switch (intent) {
    case LonIntent::Accelerate:
      return dominant == LonAction::GentleAccelerate ||
             dominant == LonAction::StrongAccelerate;
    case LonIntent::Decelerate:
      // Decelerating to a standstill still counts as decelerating.
      return dominant == LonAction::GentleDecelerate ||
             dominant == LonAction::StrongDecelerate ||
             dominant == LonAction::Stop;
    case LonIntent::Stop:
      return dominant == LonAction::Stop;
    case LonIntent::MaintainSpeed:
      return dominant == LonAction::MaintainSpeed;
    case LonIntent::Reverse:
      return dominant == LonAction::Reverse;
    case LonIntent::Unknown:
      return false;
  }
  return false;
}

bool lat_intent_matches(LatIntent intent, LatAction dominant) {
  switch (intent) {
    case LatIntent::Left:
      return dominant == LatAction::SteerLeft ||
             dominant == LatAction::SharpSteerLeft ||
             dominant == LatAction::ReverseLeft;
    case LatIntent::Right:
      return dominant == LatAction::SteerRight ||
             dominant == LatAction::SharpSteerRight ||
             dominant == LatAction::ReverseRight;
    case LatIntent::Straight:
      return dominant == LatAction::GoStraight;
    case LatIntent::Unknown:
      return false;
  }
  return false;
}

namespace {

template <typename T>
T majority(const std::map<T, int>& counts) {
  T best{};
  int best_count = -1;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

int consistency_reward(const ParsedIntent& intent,
                       const MetaActionProfile& profile, int window_start,
                       int window_len, int stop_override_frames) {
  if (profile.frames.empty()) {
    throw ValidationError("consistency_reward", "empty meta-action profile");
  }
  if (intent.longitudinal == LonIntent::Unknown ||
      intent.lateral == LatIntent::Unknown) {
    return 0;
  }
  const int n = static_cast<int>(profile.frames.size());
  const int start = std::clamp(window_start, 0, n - 1);
  const int end = std::min(n, start + std::max(1, window_len));

  std::map<LonAction, int> lon_counts;
  std::map<LatAction, int> lat_counts;
  for (int f = start; f < end; ++f) {
    ++lon_counts[profile.frames[f].longitudinal];
    ++lat_counts[profile.frames[f].lateral];
  }
  LonAction lon_dominant = majority(lon_counts);
  if (lon_counts.count(LonAction::Stop) &&
      lon_counts[LonAction::Stop] >= stop_override_frames) {
    lon_dominant = LonAction::Stop;
  }
  const LatAction lat_dominant = majority(lat_counts);

  return lon_intent_matches(intent.longitudinal, lon_dominant) &&
                 lat_intent_matches(intent.lateral, lat_dominant)
             ? 1
             : 0;
}

int collision_indicator(const Trajectory& ego_traj, const OrientedBox& ego_box,
                        const std::vector<std::vector<AgentBox>>& agents) {
  validate(ego_traj, "collision_indicator");
  validate(ego_box, "collision_indicator");
  if (agents.empty()) return 0;
  if (agents.size() != ego_traj.waypoints.size()) {
    throw ValidationError("collision_indicator",
                          "agent frames must match the trajectory horizon");
  }
  for (size_t f = 0; f < agents.size(); ++f) {
    const Waypoint& w = ego_traj.waypoints[f];
    OrientedBox ego = ego_box;
    ego.cx = w.x;
    ego.cy = w.y;
    ego.heading = w.yaw;
    for (const AgentBox& agent : agents[f]) {
      if (obb_overlap(ego, agent.box)) return 1;
    }
  }
  return 0;
}

double traj_quality(const Trajectory& pred, const Trajectory& expert,
                    const std::vector<std::vector<AgentBox>>& agents,
                    const RewardWeights& weights, const RewardConfig& cfg) {
  return traj_quality(pred, expert, agents, weights, cfg,
                      EgoState{0.0, 0.0, 0.0, pred.v0});
}

double traj_quality(const Trajectory& pred, const Trajectory& expert,
                    const std::vector<std::vector<AgentBox>>& agents,
                    const RewardWeights& weights, const RewardConfig& cfg,
                    const EgoState& initial) {
  validate(pred, "traj_quality");
  validate(expert, "traj_quality");
  if (pred.waypoints.size() != expert.waypoints.size()) {
    throw ValidationError("traj_quality", "horizon mismatch");
  }
  if (weights.lambda_l2 < 0.0 || weights.lambda_coll < 0.0 ||
      weights.lambda_jerk < 0.0) {
    throw ValidationError("traj_quality", "weights must be nonnegative");
  }

  double sq_dist = 0.0;
  for (size_t i = 0; i < pred.waypoints.size(); ++i) {
    const double dx = pred.waypoints[i].x - expert.waypoints[i].x;
    const double dy = pred.waypoints[i].y - expert.waypoints[i].y;
    sq_dist += dx * dx + dy * dy;
  }
  sq_dist /= static_cast<double>(pred.waypoints.size());

  OrientedBox ego_box;
  ego_box.length = cfg.ego_length;
  ego_box.width = cfg.ego_width;
  const int collided = collision_indicator(pred, ego_box, agents);

  const ControlSequence fitted = fit_controls(pred, cfg.fit, initial);
  const std::vector<double> jerks = jerk_profile(fitted);
  double sq_jerk = 0.0;
  for (double j : jerks) sq_jerk += j * j;
  sq_jerk /= static_cast<double>(jerks.size());

  const double penalty = weights.lambda_l2 * sq_dist +
                         weights.lambda_coll * collided +
                         weights.lambda_jerk * sq_jerk;
  return weights.negated_penalty ? -penalty : penalty;
}

RewardBreakdown total_reward(const RewardRollout& rollout,
                             const RewardReference& gt,
                             const std::vector<std::vector<AgentBox>>& agents,
                             const RewardConfig& cfg, Judge& judge) {
  RewardBreakdown out;
  out.r_reason = judge.score_rubric(gt.trace, rollout.trace);

  const ParsedIntent intent = parse_intent(rollout.trace);
  const ControlSequence fitted = fit_controls(rollout.trajectory, cfg.fit);
  const MetaActionProfile profile =
      detect_meta_actions(rollout.trajectory, fitted, cfg.detector);
  out.r_consistency =
      consistency_reward(intent, profile, 0, cfg.consistency_window,
                         cfg.stop_override_frames);

  out.r_traj =
      traj_quality(rollout.trajectory, gt.expert, agents, cfg.weights, cfg);
  out.total = cfg.judge_weight * out.r_reason +
              cfg.consistency_weight * out.r_consistency + out.r_traj;
  return out;
}

}  // namespace driveline

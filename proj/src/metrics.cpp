#include "driveline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driveline/errors.hpp"
#include "driveline/util.hpp"

namespace driveline {

namespace {

double ade_truncated(const Trajectory& pred, const Trajectory& gt, size_t n) {
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sum += std::hypot(pred.waypoints[i].x - gt.waypoints[i].x,
                      pred.waypoints[i].y - gt.waypoints[i].y);
  }
  return sum / static_cast<double>(n);
}

}  // namespace

double ade(const Trajectory& pred, const Trajectory& gt) {
  validate(pred, "ade");
  validate(gt, "ade");
  if (pred.waypoints.size() != gt.waypoints.size()) {
    throw ValidationError("ade", "horizon mismatch");
  }
  return ade_truncated(pred, gt, pred.waypoints.size());
}

double min_ade(const std::vector<Trajectory>& preds, const Trajectory& gt,
               double horizon_s) {
  if (preds.empty()) {
    throw ValidationError("min_ade", "empty candidate list");
  }
  size_t n = 0;
  if (horizon_s == 3.0) {
    n = 30;
  } else if (horizon_s == 6.0) {
    n = 64;
  } else {
    throw ValidationError("min_ade", "horizon must be 3 or 6 seconds");
  }
  validate(gt, "min_ade");
  double best = std::numeric_limits<double>::infinity();
  for (const Trajectory& pred : preds) {
    validate(pred, "min_ade");
    if (pred.waypoints.size() != gt.waypoints.size()) {
      throw ValidationError("min_ade", "horizon mismatch");
    }
    best = std::min(best, ade_truncated(pred, gt, n));
  }
  return best;
}

double comfort_fraction(const std::vector<Trajectory>& trajs, double a_comfort,
                        const FitConfig& fit) {
  if (trajs.empty()) {
    throw ValidationError("comfort_fraction", "empty trajectory list");
  }
  int comfortable = 0;
  for (const Trajectory& traj : trajs) {
    const ControlSequence controls = fit_controls(traj, fit);
    bool ok = true;
    for (const Control& u : controls.controls) {
      if (std::abs(u.a) > a_comfort) {
        ok = false;
        break;
      }
    }
    if (ok) ++comfortable;
  }
  return static_cast<double>(comfortable) / static_cast<double>(trajs.size());
}

const char* to_string(EventKind k) {
  return k == EventKind::Offroad ? "Offroad" : "CloseEncounter";
}

namespace {

OrientedBox ego_box_at(const Waypoint& w, const EpisodeMetricConfig& cfg) {
  OrientedBox box;
  box.cx = w.x;
  box.cy = w.y;
  box.heading = w.yaw;
  box.length = cfg.ego_length;
  box.width = cfg.ego_width;
  return box;
}

bool box_inside_polygon(const OrientedBox& box,
                        const std::vector<Vec2>& polygon) {
  for (const Vec2& corner : box.corners()) {
    if (!point_in_polygon(corner, polygon)) return false;
  }
  return true;
}

// Velocity by central-ish finite differences along a waypoint sequence.
Vec2 velocity_at(const std::vector<Waypoint>& pts, size_t f, double dt) {
  const size_t a = f > 0 ? f - 1 : f;
  const size_t b = f + 1 < pts.size() ? f + 1 : f;
  if (a == b) return {0.0, 0.0};
  const double span = static_cast<double>(b - a) * dt;
  return {(pts[b].x - pts[a].x) / span, (pts[b].y - pts[a].y) / span};
}

Vec2 agent_velocity(const Episode& episode, int agent_id, size_t f) {
  auto find_in = [&](size_t frame) -> const AgentBox* {
    for (const AgentBox& a : episode.agents[frame]) {
      if (a.id == agent_id) return &a;
    }
    return nullptr;
  };
  const AgentBox* here = find_in(f);
  const AgentBox* before = f > 0 ? find_in(f - 1) : nullptr;
  const AgentBox* after = f + 1 < episode.agents.size() ? find_in(f + 1) : nullptr;
  const AgentBox* from = before != nullptr ? before : here;
  const AgentBox* to = after != nullptr ? after : here;
  if (from == nullptr || to == nullptr || from == to) return {0.0, 0.0};
  double span = episode.ego.dt;
  if (before != nullptr && after != nullptr) span *= 2.0;
  return {(to->box.cx - from->box.cx) / span,
          (to->box.cy - from->box.cy) / span};
}

// Rear-end: the contender sits in the ego's rear sector and is closing.
bool rear_end(const Episode& episode, const Trajectory& policy, size_t f,
              const AgentBox& contender, const EpisodeMetricConfig& cfg) {
  const Waypoint& w = policy.waypoints[f];
  const double bearing =
      std::atan2(contender.box.cy - w.y, contender.box.cx - w.x);
  const double rear = wrap_angle(w.yaw + kPi);
  const double off = std::abs(wrap_angle(bearing - rear));
  if (off > cfg.rear_sector_deg * kPi / 180.0) return false;

  const Vec2 v_contender = agent_velocity(episode, contender.id, f);
  const Vec2 v_ego = velocity_at(policy.waypoints, f, policy.dt);
  Vec2 toward_ego{w.x - contender.box.cx, w.y - contender.box.cy};
  const double dist = toward_ego.norm();
  if (dist < 1e-9) return true;
  toward_ego = toward_ego * (1.0 / dist);
  const double closing = (v_contender - v_ego).dot(toward_ego);
  return closing > 0.0;
}

}  // namespace

EventLog run_episode_metrics(const Episode& episode,
                             const Trajectory& policy_traj,
                             const EpisodeMetricConfig& cfg) {
  validate(episode, "run_episode_metrics");
  validate(policy_traj, "run_episode_metrics");
  if (policy_traj.waypoints.size() != episode.ego.waypoints.size()) {
    throw ValidationError("run_episode_metrics",
                          "policy and episode horizons differ");
  }

  EventLog log;
  const size_t horizon = policy_traj.waypoints.size();
  size_t terminal = horizon;  // exclusive
  for (size_t f = 0; f < horizon; ++f) {
    const OrientedBox ego = ego_box_at(policy_traj.waypoints[f], cfg);

    Event event;
    bool hit = false;
    if (!box_inside_polygon(ego, episode.drivable)) {
      event = {static_cast<int>(f), EventKind::Offroad, true, false};
      hit = true;
    } else {
      for (const AgentBox& agent : episode.agents[f]) {
        if (obb_gap(ego, agent.box) < cfg.d_close_encounter) {
          event = {static_cast<int>(f), EventKind::CloseEncounter,
                   !rear_end(episode, policy_traj, f, agent, cfg), false};
          hit = true;
          break;
        }
      }
    }
    if (hit) {
      const double deviation =
          std::hypot(policy_traj.waypoints[f].x - episode.ego.waypoints[f].x,
                     policy_traj.waypoints[f].y - episode.ego.waypoints[f].y);
      event.excluded = deviation > cfg.deviation_limit;
      log.events.push_back(event);
      terminal = f + 1;
      break;
    }
  }

  // Distance along the recorded ego path up to the terminal frame.
  double meters = 0.0;
  double px = 0.0, py = 0.0;  // recorded path starts at the ego-frame origin
  for (size_t f = 0; f < terminal; ++f) {
    meters += std::hypot(episode.ego.waypoints[f].x - px,
                         episode.ego.waypoints[f].y - py);
    px = episode.ego.waypoints[f].x;
    py = episode.ego.waypoints[f].y;
  }
  log.km_driven = meters / 1000.0;
  return log;
}

ClosedLoopSummary closed_loop_summary(const std::vector<EventLog>& logs) {
  if (logs.empty()) {
    throw ValidationError("closed_loop_summary", "no episode logs");
  }
  ClosedLoopSummary out;
  double total_km = 0.0;
  int offroad_episodes = 0, ce_episodes = 0;
  int counted_events = 0, counted_at_fault = 0;
  for (const EventLog& log : logs) {
    total_km += log.km_driven;
    for (const Event& e : log.events) {
      if (e.excluded) continue;
      ++counted_events;
      if (e.kind == EventKind::Offroad) {
        ++offroad_episodes;
        ++counted_at_fault;
      } else {
        ++ce_episodes;
        if (e.at_fault) ++counted_at_fault;
      }
    }
  }
  const double n = static_cast<double>(logs.size());
  out.offroad_rate = offroad_episodes / n;
  out.close_encounter_rate = ce_episodes / n;
  out.score_km = total_km / std::max(1, counted_events);
  out.score_at_fault_km = total_km / std::max(1, counted_at_fault);
  return out;
}

TokenBudget single_image_token_budget(int width, int height, int cameras) {
  if (width <= 0 || height <= 0 || cameras <= 0) {
    throw ValidationError("token_budget", "dimensions must be positive");
  }
  if (width % 28 != 0 || height % 28 != 0) {
    throw ValidationError("token_budget",
                          "width and height must be multiples of 28 "
                          "(14-px patches, then a 2x downsample)");
  }
  TokenBudget out;
  out.total_tokens = static_cast<long>(width / 28) * (height / 28);
  out.per_image = static_cast<double>(out.total_tokens) / cameras;
  return out;
}

TokenBudget triplane_token_budget(int sx, int sy, int sz, int px, int py,
                                  int pz, int cameras) {
  if (sx <= 0 || sy <= 0 || sz <= 0 || px <= 0 || py <= 0 || pz <= 0 ||
      cameras <= 0) {
    throw ValidationError("token_budget", "dimensions must be positive");
  }
  auto patches = [](int grid, int patch, const char* axis) {
    if ((grid - patch) % patch != 0) {
      throw ValidationError("token_budget",
                            std::string("patch size must evenly divide the ") +
                                axis + " grid");
    }
    return (grid - patch) / patch + 1;
  };
  const long nx = patches(sx, px, "x");
  const long ny = patches(sy, py, "y");
  const long nz = patches(sz, pz, "z");
  TokenBudget out;
  out.total_tokens = nx * ny + nx * nz + ny * nz;
  out.per_image = static_cast<double>(out.total_tokens) / cameras;
  return out;
}

}  // namespace driveline

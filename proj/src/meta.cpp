#include "driveline/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "driveline/errors.hpp"
#include "driveline/util.hpp"

namespace driveline {

const char* to_string(LonAction a) {
  switch (a) {
    case LonAction::GentleAccelerate: return "GentleAccelerate";
    case LonAction::StrongAccelerate: return "StrongAccelerate";
    case LonAction::GentleDecelerate: return "GentleDecelerate";
    case LonAction::StrongDecelerate: return "StrongDecelerate";
    case LonAction::MaintainSpeed: return "MaintainSpeed";
    case LonAction::Stop: return "Stop";
    case LonAction::Reverse: return "Reverse";
  }
  return "MaintainSpeed";
}

const char* to_string(LatAction a) {
  switch (a) {
    case LatAction::SteerLeft: return "SteerLeft";
    case LatAction::SteerRight: return "SteerRight";
    case LatAction::SharpSteerLeft: return "SharpSteerLeft";
    case LatAction::SharpSteerRight: return "SharpSteerRight";
    case LatAction::GoStraight: return "GoStraight";
    case LatAction::ReverseLeft: return "ReverseLeft";
    case LatAction::ReverseRight: return "ReverseRight";
  }
  return "GoStraight";
}

LonAction lon_action_from_string(const std::string& s) {
  for (LonAction a :
       {LonAction::GentleAccelerate, LonAction::StrongAccelerate,
        LonAction::GentleDecelerate, LonAction::StrongDecelerate,
        LonAction::MaintainSpeed, LonAction::Stop, LonAction::Reverse}) {
    if (s == to_string(a)) return a;
  }
  throw ValidationError("meta_action", "unknown longitudinal action: " + s);
}

LatAction lat_action_from_string(const std::string& s) {
  for (LatAction a :
       {LatAction::SteerLeft, LatAction::SteerRight, LatAction::SharpSteerLeft,
        LatAction::SharpSteerRight, LatAction::GoStraight,
        LatAction::ReverseLeft, LatAction::ReverseRight}) {
    if (s == to_string(a)) return a;
  }
  throw ValidationError("meta_action", "unknown lateral action: " + s);
}

void validate(const DetectorConfig& cfg, const char* context) {
  if (!(0.0 < cfg.a_gentle && cfg.a_gentle < cfg.a_strong)) {
    throw ValidationError(context, "need 0 < a_gentle < a_strong");
  }
  if (!(0.0 < cfg.kappa_steer && cfg.kappa_steer < cfg.kappa_sharp)) {
    throw ValidationError(context, "need 0 < kappa_steer < kappa_sharp");
  }
  if (!(cfg.v_stop > 0.0) || cfg.hysteresis_frames < 1) {
    throw ValidationError(context, "v_stop must be positive and hysteresis "
                                   ">= 1 frame");
  }
}

namespace {

LonAction classify_lon(double v, double a, const DetectorConfig& cfg) {
  // Genuine reversing only beyond the standstill band; |v| < v_stop is a
  // stop regardless of sign so fitting jitter around zero stays Stop.
  if (v < -cfg.v_stop) return LonAction::Reverse;
  if (v < cfg.v_stop) return LonAction::Stop;
  if (a >= cfg.a_strong) return LonAction::StrongAccelerate;
  if (a >= cfg.a_gentle) return LonAction::GentleAccelerate;
  if (a <= -cfg.a_strong) return LonAction::StrongDecelerate;
  if (a <= -cfg.a_gentle) return LonAction::GentleDecelerate;
  return LonAction::MaintainSpeed;
}

LatAction classify_lat(double v, double kappa, const DetectorConfig& cfg) {
  if (v < -cfg.v_stop) {
    if (kappa >= cfg.kappa_steer) return LatAction::ReverseLeft;
    if (kappa <= -cfg.kappa_steer) return LatAction::ReverseRight;
    return LatAction::GoStraight;
  }
  if (kappa >= cfg.kappa_sharp) return LatAction::SharpSteerLeft;
  if (kappa <= -cfg.kappa_sharp) return LatAction::SharpSteerRight;
  if (kappa >= cfg.kappa_steer) return LatAction::SteerLeft;
  if (kappa <= -cfg.kappa_steer) return LatAction::SteerRight;
  return LatAction::GoStraight;
}

// Commits a new label only once it persists for h frames or runs to the end
// of the sequence, so no interior run is shorter than h.
template <typename T>
std::vector<T> debounce(const std::vector<T>& raw, int h) {
  std::vector<T> out(raw.size());
  if (raw.empty()) return out;
  out[0] = raw[0];
  for (size_t i = 1; i < raw.size(); ++i) {
    if (raw[i] == out[i - 1]) {
      out[i] = out[i - 1];
      continue;
    }
    size_t run = 1;
    while (i + run < raw.size() && raw[i + run] == raw[i]) ++run;
    const bool reaches_end = i + run == raw.size();
    out[i] = (static_cast<int>(run) >= h || reaches_end) ? raw[i] : out[i - 1];
  }
  return out;
}

}  // namespace

MetaActionProfile detect_meta_actions(const Trajectory& traj,
                                      const ControlSequence& controls,
                                      const DetectorConfig& cfg) {
  validate(cfg, "detect_meta_actions");
  validate(traj, "detect_meta_actions");
  const double inf = std::numeric_limits<double>::infinity();
  validate(controls, inf, inf, "detect_meta_actions");
  if (traj.waypoints.size() != controls.controls.size() ||
      std::abs(traj.dt - controls.dt) > 1e-12) {
    throw ValidationError("detect_meta_actions",
                          "trajectory and controls must share horizon and dt");
  }

  const std::vector<double> v = speed_profile(traj.v0, controls);
  const size_t n = v.size();
  std::vector<LonAction> lon_raw(n);
  std::vector<LatAction> lat_raw(n);
  for (size_t i = 0; i < n; ++i) {
    lon_raw[i] = classify_lon(v[i], controls.controls[i].a, cfg);
    lat_raw[i] = classify_lat(v[i], controls.controls[i].kappa, cfg);
  }
  const std::vector<LonAction> lon = debounce(lon_raw, cfg.hysteresis_frames);
  const std::vector<LatAction> lat = debounce(lat_raw, cfg.hysteresis_frames);

  MetaActionProfile profile;
  profile.thresholds = cfg;
  profile.frames.resize(n);
  for (size_t i = 0; i < n; ++i) {
    profile.frames[i] = {lon[i], lat[i]};
  }
  return profile;
}

std::vector<int> transition_frames(const MetaActionProfile& profile) {
  if (profile.frames.empty()) {
    throw ValidationError("transition_frames", "empty profile");
  }
  std::vector<int> out;
  for (size_t i = 1; i < profile.frames.size(); ++i) {
    if (!(profile.frames[i] == profile.frames[i - 1])) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

KeyframeResult select_keyframe(int transition_frame, int history_frames,
                               double buffer_s) {
  if (transition_frame < 0 || history_frames < 0 || buffer_s < 0.0) {
    throw ValidationError("select_keyframe", "negative argument");
  }
  const int buffered =
      transition_frame - static_cast<int>(std::lround(buffer_s * 10.0));
  KeyframeResult r;
  r.clamped = buffered < history_frames;
  r.frame = std::max(buffered, history_frames);
  return r;
}

namespace {

struct LocalPoint {
  double x = 0.0;  // forward of the ego pose
  double y = 0.0;  // left of the ego pose
};

LocalPoint to_ego_frame(const Waypoint& pose, double px, double py) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  const double dx = px - pose.x, dy = py - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

bool in_corridor(const LocalPoint& p, const ScenarioConfig& scen) {
  return p.x > 0.0 && p.x <= scen.corridor_length &&
         std::abs(p.y) <= scen.corridor_half_width;
}

struct TrackPoint {
  int frame;
  LocalPoint local;  // relative to the ego pose at that frame
};

// Frame-major agent boxes regrouped by id.
std::map<int, std::vector<TrackPoint>> vehicle_tracks(const Episode& episode) {
  std::map<int, std::vector<TrackPoint>> tracks;
  for (size_t f = 0; f < episode.agents.size(); ++f) {
    const Waypoint& pose = episode.ego.waypoints[f];
    for (const AgentBox& agent : episode.agents[f]) {
      if (agent.cls != AgentClass::Vehicle) continue;
      tracks[agent.id].push_back(
          {static_cast<int>(f),
           to_ego_frame(pose, agent.box.cx, agent.box.cy)});
    }
  }
  return tracks;
}

bool agent_of_class_in_corridor(const Episode& episode, int frame,
                                const ScenarioConfig& scen, bool vru) {
  const Waypoint& pose = episode.ego.waypoints[frame];
  for (const AgentBox& agent : episode.agents[frame]) {
    const bool is_vru = agent.cls != AgentClass::Vehicle;
    if (is_vru != vru) continue;
    if (in_corridor(to_ego_frame(pose, agent.box.cx, agent.box.cy), scen)) {
      return true;
    }
  }
  return false;
}

bool is_decel(LonAction a) {
  return a == LonAction::GentleDecelerate || a == LonAction::StrongDecelerate;
}

}  // namespace

std::vector<ScenarioTag> tag_reactive_scenarios(const Episode& episode,
                                                const DetectorConfig& cfg,
                                                const ScenarioConfig& scen) {
  validate(episode, "tag_reactive_scenarios");
  const ControlSequence fitted = fit_controls(episode.ego, scen.fit);
  const MetaActionProfile profile =
      detect_meta_actions(episode.ego, fitted, cfg);
  const int n = static_cast<int>(profile.frames.size());

  std::vector<ScenarioTag> tags;

  // Deceleration onsets: lead-vehicle and VRU-yield tags.
  for (int f = 0; f < n; ++f) {
    const bool starts =
        is_decel(profile.frames[f].longitudinal) &&
        (f == 0 || !is_decel(profile.frames[f - 1].longitudinal));
    if (!starts) continue;
    const KeyframeResult kf =
        select_keyframe(f, scen.history_frames, scen.keyframe_buffer_s);
    if (agent_of_class_in_corridor(episode, f, scen, /*vru=*/true)) {
      tags.push_back({"yield-to-vru", kf.frame, kf.clamped});
      continue;
    }
    if (agent_of_class_in_corridor(episode, f, scen, /*vru=*/false)) {
      bool stops = false;
      for (int g = f; g < n; ++g) {
        if (profile.frames[g].longitudinal == LonAction::Stop) {
          stops = true;
          break;
        }
      }
      tags.push_back(
          {stops ? "stop-for-lead" : "slow-for-lead", kf.frame, kf.clamped});
    }
  }

  // Ego lane change: lateral offset (trajectories are ego-frame, so the
  // initial lane center is y = 0) crossing half a lane and staying there.
  for (int f = 0; f < n; ++f) {
    if (std::abs(episode.ego.waypoints[f].y) < scen.half_lane_width) continue;
    bool sustained = true;
    const int end = std::min(n, f + scen.sustain_frames);
    for (int g = f; g < end; ++g) {
      if (std::abs(episode.ego.waypoints[g].y) < 0.8 * scen.half_lane_width) {
        sustained = false;
        break;
      }
    }
    if (!sustained) continue;
    int start = f;
    while (start > 0 &&
           std::abs(episode.ego.waypoints[start - 1].y) > scen.off_center_eps) {
      --start;
    }
    const KeyframeResult kf =
        select_keyframe(start, scen.history_frames, scen.keyframe_buffer_s);
    tags.push_back({"lane-change", kf.frame, kf.clamped});
    break;  // first crossing only
  }

  // Cut-in: a vehicle entering the corridor laterally; the keyframe is the
  // frame where it starts to move off-center, with no extra buffer.
  for (const auto& [id, track] : vehicle_tracks(episode)) {
    for (size_t k = 1; k < track.size(); ++k) {
      if (track[k].frame != track[k - 1].frame + 1) continue;
      if (!in_corridor(track[k].local, scen)) continue;
      if (in_corridor(track[k - 1].local, scen)) continue;
      const bool lateral_entry =
          std::abs(track[k - 1].local.y) > std::abs(track[k].local.y) + 1e-9;
      if (!lateral_entry) continue;
      size_t s = k;
      while (s > 0 && track[s - 1].frame + 1 == track[s].frame &&
             std::abs(track[s - 1].local.y) >
                 std::abs(track[s].local.y) + 1e-9) {
        --s;
      }
      // The walk stops on the last stationary sample, so the inward motion
      // is first visible one frame later; a track already moving at its
      // first observation starts there.
      int onset;
      if (s == k) {
        onset = track[k].frame;
      } else if (s > 0 && track[s].frame == track[s - 1].frame + 1) {
        onset = track[s].frame + 1;
      } else {
        onset = track[s].frame;
      }
      const KeyframeResult kf =
          select_keyframe(onset, scen.history_frames, 0.0);
      tags.push_back({"cut-in", kf.frame, kf.clamped});
      break;
    }
  }

  return tags;
}

std::vector<ScenarioRange> tag_proactive_scenarios(const Episode& episode,
                                                   const DetectorConfig& cfg,
                                                   const ScenarioConfig& scen) {
  validate(episode, "tag_proactive_scenarios");
  validate(cfg, "tag_proactive_scenarios");
  const ControlSequence fitted = fit_controls(episode.ego, scen.fit);
  const int n = static_cast<int>(fitted.controls.size());

  std::vector<ScenarioRange> out;

  // Curvy road: sustained curvature above the steering threshold.
  int run_start = -1;
  for (int f = 0; f <= n; ++f) {
    const bool curving =
        f < n && std::abs(fitted.controls[f].kappa) >= cfg.kappa_steer;
    if (curving && run_start < 0) run_start = f;
    if (!curving && run_start >= 0) {
      if (f - run_start >= scen.sustain_frames) {
        const int buf = static_cast<int>(std::lround(scen.keyframe_buffer_s * 10));
        ScenarioRange r;
        r.tag = "curvy-road";
        r.range_start = std::max(run_start - buf, scen.history_frames);
        r.range_end = std::max(f - 1, r.range_start);
        out.push_back(r);
      }
      run_start = -1;
    }
  }

  // Lane-change preparation: a routing flag plus a blocked target lane.
  for (const std::string& route : {std::string("route_lc_left"),
                                   std::string("route_lc_right")}) {
    if (std::find(episode.tags.begin(), episode.tags.end(), route) ==
        episode.tags.end()) {
      continue;
    }
    const double target_y = (route == "route_lc_left" ? 1.0 : -1.0) * 2.0 *
                            scen.half_lane_width;
    int blocked_start = -1;
    for (int f = 0; f <= n; ++f) {
      bool blocked = false;
      if (f < n) {
        const Waypoint& pose = episode.ego.waypoints[f];
        for (const AgentBox& agent : episode.agents[f]) {
          if (agent.cls != AgentClass::Vehicle) continue;
          const LocalPoint p =
              to_ego_frame(pose, agent.box.cx, agent.box.cy);
          if (std::abs(p.x) <= scen.corridor_length &&
              std::abs(p.y - target_y) <= scen.corridor_half_width) {
            blocked = true;
            break;
          }
        }
      }
      if (blocked && blocked_start < 0) blocked_start = f;
      if (!blocked && blocked_start >= 0) {
        if (f - blocked_start >= scen.sustain_frames) {
          ScenarioRange r;
          r.tag = "lane-change-preparation";
          r.range_start = std::max(blocked_start, scen.history_frames);
          r.range_end = std::max(f - 1, r.range_start);
          out.push_back(r);
        }
        blocked_start = -1;
      }
    }
  }

  return out;
}

}  // namespace driveline

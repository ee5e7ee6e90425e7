#pragma once

#include <string>
#include <vector>

#include "driveline/episode.hpp"
#include "driveline/traj.hpp"

namespace driveline {

// Mean Euclidean waypoint distance over the full horizon.
double ade(const Trajectory& pred, const Trajectory& gt);

// Minimum ADE over candidates, truncated to 3 s (30 waypoints) or 6 s (64).
double min_ade(const std::vector<Trajectory>& preds, const Trajectory& gt,
               double horizon_s);

// Fraction of trajectories whose fitted acceleration stays within the
// comfort band at every step.
double comfort_fraction(const std::vector<Trajectory>& trajs, double a_comfort,
                        const FitConfig& fit = {});

enum class EventKind { Offroad, CloseEncounter };

const char* to_string(EventKind k);

struct Event {
  int frame = 0;
  EventKind kind = EventKind::Offroad;
  bool at_fault = true;
  bool excluded = false;  // ego deviated > deviation_limit from the log
};

struct EventLog {
  std::vector<Event> events;  // at most one terminal event
  double km_driven = 0.0;     // recorded-path length up to the terminal frame
};

struct EpisodeMetricConfig {
  double ego_length = 4.8;       // m
  double ego_width = 2.0;        // m
  double d_close_encounter = 0.5;  // m gap between oriented boxes
  double rear_sector_deg = 60.0;   // contact bearing vs the negative heading
  double deviation_limit = 4.0;    // m from the recorded ego
};

// Frame walk: offroad when any ego-box corner leaves the drivable polygon,
// close encounter when the oriented-box gap to any agent drops below
// d_close_encounter. The episode ends at the first event. Rear-end close
// encounters (contender behind the ego and closing) are not at fault.
EventLog run_episode_metrics(const Episode& episode,
                             const Trajectory& policy_traj,
                             const EpisodeMetricConfig& cfg = {});

struct ClosedLoopSummary {
  double offroad_rate = 0.0;          // fraction of episodes
  double close_encounter_rate = 0.0;  // fraction of episodes
  double score_km = 0.0;              // km driven per counted event
  double score_at_fault_km = 0.0;     // rear-end close encounters excluded
};

// Excluded events are dropped everywhere; the event denominator floors at 1
// so event-free runs score the total distance.
ClosedLoopSummary closed_loop_summary(const std::vector<EventLog>& logs);

// Vision-token accounting.
struct TokenBudget {
  long total_tokens = 0;
  double per_image = 0.0;  // total / cameras when cameras > 0
};

// (W/28) * (H/28): 14-px patches followed by the 2x downsample.
TokenBudget single_image_token_budget(int width, int height, int cameras = 1);

// Patch counts over the three planes of an (Sx, Sy, Sz) grid.
TokenBudget triplane_token_budget(int sx, int sy, int sz, int px, int py,
                                  int pz, int cameras = 1);

}  // namespace driveline

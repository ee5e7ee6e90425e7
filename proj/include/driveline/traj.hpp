#pragma once

#include <cstddef>
#include <vector>

namespace driveline {

inline constexpr int kHorizon = 64;       // future waypoints at 10 Hz
inline constexpr double kDt = 0.1;        // seconds per step

// Planar vehicle state. theta is kept in (-pi, pi].
struct EgoState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double theta = 0.0;  // rad
  double v = 0.0;      // m/s
};

struct Waypoint {
  double x = 0.0;    // m
  double y = 0.0;    // m
  double yaw = 0.0;  // rad, (-pi, pi]
};

// 6.4 s of future motion in the ego frame at the anchor time. v0 is the
// speed at the anchor, before the first waypoint.
struct Trajectory {
  std::vector<Waypoint> waypoints;  // exactly kHorizon entries
  double dt = kDt;
  double v0 = 0.0;       // m/s
  bool reverse = false;  // permits v0 < 0
};

struct Control {
  double a = 0.0;      // m/s^2
  double kappa = 0.0;  // 1/m
};

struct ControlSequence {
  std::vector<Control> controls;  // exactly kHorizon entries
  double dt = kDt;
};

struct FitConfig {
  double tikhonov_lambda = 1.0;  // second-difference ridge weight
  double v_epsilon = 0.05;       // m/s, curvature-inversion guard
  double a_bound = 10.0;         // m/s^2
  double kappa_bound = 0.2;      // 1/m
};

// Throw ValidationError on malformed data (wrong length, non-finite fields,
// out-of-bound controls). Used at every public entry point.
void validate(const Trajectory& traj, const char* context);
void validate(const ControlSequence& controls, double a_bound,
              double kappa_bound, const char* context);
void validate(const EgoState& state, const char* context);

// Forward Euler-discretized unicycle rollout: speed first, then heading from
// kappa*v plus the half-step kappa*a term, then position by the trapezoid of
// v*cos(theta) / v*sin(theta). Emitted yaw is the integrated heading.
// Controls outside the configured bounds are a validation error naming the
// offending index and channel.
Trajectory integrate_controls(const EgoState& initial,
                              const ControlSequence& controls,
                              const FitConfig& bounds = {});

// Inverse of integrate_controls, regularized:
//   1. headings from waypoint yaw,
//   2. per-step speeds by least squares on the trapezoidal increments,
//   3. per-step inversion a = dv/dt, kappa = dtheta / (dt*v + dt^2*a/2)
//      with a standstill guard that carries the previous curvature,
//   4. each channel smoothed by min |u - u_raw|^2 + lambda*|D2 u|^2,
//   5. clamp to bounds.
// `initial` defaults to the origin pose with the trajectory's v0.
ControlSequence fit_controls(const Trajectory& traj, const FitConfig& cfg);
ControlSequence fit_controls(const Trajectory& traj, const FitConfig& cfg,
                             const EgoState& initial);

// 63 forward-difference jerks (a[i+1] - a[i]) / dt.
std::vector<double> jerk_profile(const ControlSequence& controls);

// Speed profile implied by v0 and the acceleration channel: entry i is the
// speed at waypoint i (after step i). Size kHorizon.
std::vector<double> speed_profile(double v0, const ControlSequence& controls);

// Closed-form ridge smoother used by fit_controls, exposed for tests:
// argmin_u |u - raw|^2 + lambda * |D2 u|^2 with D2 the second difference.
std::vector<double> ridge_smooth(const std::vector<double>& raw,
                                 double lambda);

}  // namespace driveline

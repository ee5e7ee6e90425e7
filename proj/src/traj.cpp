#include "driveline/traj.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "driveline/errors.hpp"
#include "driveline/util.hpp"

namespace driveline {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void validate(const EgoState& s, const char* context) {
  if (!finite(s.x) || !finite(s.y) || !finite(s.theta) || !finite(s.v)) {
    throw ValidationError(context, "non-finite ego state");
  }
}

void validate(const Trajectory& traj, const char* context) {
  if (static_cast<int>(traj.waypoints.size()) != kHorizon) {
    throw ValidationError(context, "trajectory must have " +
                                       std::to_string(kHorizon) +
                                       " waypoints, got " +
                                       std::to_string(traj.waypoints.size()));
  }
  if (!(traj.dt > 0.0) || !finite(traj.dt)) {
    throw ValidationError(context, "trajectory dt must be positive");
  }
  if (!finite(traj.v0)) {
    throw ValidationError(context, "non-finite v0");
  }
  if (traj.v0 < 0.0 && !traj.reverse) {
    throw ValidationError(context, "v0 < 0 requires the reverse flag");
  }
  for (size_t i = 0; i < traj.waypoints.size(); ++i) {
    const Waypoint& w = traj.waypoints[i];
    if (!finite(w.x) || !finite(w.y) || !finite(w.yaw)) {
      throw ValidationError(context,
                            "non-finite waypoint at index " + std::to_string(i));
    }
  }
}

void validate(const ControlSequence& c, double a_bound, double kappa_bound,
              const char* context) {
  if (static_cast<int>(c.controls.size()) != kHorizon) {
    throw ValidationError(context, "control sequence must have " +
                                       std::to_string(kHorizon) +
                                       " pairs, got " +
                                       std::to_string(c.controls.size()));
  }
  if (!(c.dt > 0.0) || !finite(c.dt)) {
    throw ValidationError(context, "control dt must be positive");
  }
  for (size_t i = 0; i < c.controls.size(); ++i) {
    const Control& u = c.controls[i];
    if (!finite(u.a) || !finite(u.kappa)) {
      throw ValidationError(context,
                            "non-finite control at index " + std::to_string(i));
    }
    if (std::abs(u.a) > a_bound) {
      throw ValidationError(
          context, "acceleration bound violated at index " + std::to_string(i));
    }
    if (std::abs(u.kappa) > kappa_bound) {
      throw ValidationError(
          context, "curvature bound violated at index " + std::to_string(i));
    }
  }
}

Trajectory integrate_controls(const EgoState& initial,
                              const ControlSequence& controls,
                              const FitConfig& bounds) {
  validate(initial, "integrate_controls");
  validate(controls, bounds.a_bound, bounds.kappa_bound,
           "integrate_controls");

  const double dt = controls.dt;
  Trajectory out;
  out.dt = dt;
  out.v0 = initial.v;
  out.reverse = initial.v < 0.0;
  out.waypoints.reserve(kHorizon);

  double x = initial.x;
  double y = initial.y;
  double theta = wrap_angle(initial.theta);
  double v = initial.v;
  for (int i = 0; i < kHorizon; ++i) {
    const double a = controls.controls[i].a;
    const double kappa = controls.controls[i].kappa;
    const double v_next = v + dt * a;
    const double theta_next =
        wrap_angle(theta + dt * kappa * v + 0.5 * dt * dt * kappa * a);
    x += 0.5 * dt * (v * std::cos(theta) + v_next * std::cos(theta_next));
    y += 0.5 * dt * (v * std::sin(theta) + v_next * std::sin(theta_next));
    v = v_next;
    theta = theta_next;
    out.waypoints.push_back({x, y, theta});
  }
  return out;
}

std::vector<double> ridge_smooth(const std::vector<double>& raw,
                                 double lambda) {
  const int n = static_cast<int>(raw.size());
  if (n < 3 || lambda <= 0.0) return raw;
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n - 2, n);
  for (int r = 0; r < n - 2; ++r) {
    d2(r, r) = 1.0;
    d2(r, r + 1) = -2.0;
    d2(r, r + 2) = 1.0;
  }
  Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(n, n) + lambda * (d2.transpose() * d2);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = raw[i];
  Eigen::VectorXd u = lhs.ldlt().solve(rhs);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = u(i);
  return out;
}

std::vector<double> speed_profile(double v0, const ControlSequence& controls) {
  std::vector<double> v(controls.controls.size());
  double cur = v0;
  for (size_t i = 0; i < controls.controls.size(); ++i) {
    cur += controls.dt * controls.controls[i].a;
    v[i] = cur;
  }
  return v;
}

ControlSequence fit_controls(const Trajectory& traj, const FitConfig& cfg) {
  return fit_controls(traj, cfg, EgoState{0.0, 0.0, 0.0, traj.v0});
}

ControlSequence fit_controls(const Trajectory& traj, const FitConfig& cfg,
                             const EgoState& initial) {
  validate(traj, "fit_controls");
  validate(initial, "fit_controls");
  if (!(cfg.v_epsilon > 0.0) || cfg.tikhonov_lambda < 0.0 ||
      !(cfg.a_bound > 0.0) || !(cfg.kappa_bound > 0.0)) {
    throw ValidationError("fit_controls", "invalid FitConfig");
  }

  const int n = kHorizon;
  const double dt = traj.dt;

  // Headings, positions, and the anchor pose as step 0.
  std::vector<double> theta(n + 1), px(n + 1), py(n + 1);
  theta[0] = wrap_angle(initial.theta);
  px[0] = initial.x;
  py[0] = initial.y;
  for (int i = 0; i < n; ++i) {
    theta[i + 1] = wrap_angle(traj.waypoints[i].yaw);
    px[i + 1] = traj.waypoints[i].x;
    py[i + 1] = traj.waypoints[i].y;
  }

  // Speeds v[1..n] from least squares on the trapezoidal increments
  //   dp_i = dt/2 * (v_i * h_i + v_{i+1} * h_{i+1}),  h = (cos, sin)(theta).
  // v[0] is known; each step contributes an x and a y equation.
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(2 * n, n);
  Eigen::VectorXd b_vec(2 * n);
  const double half_dt = 0.5 * dt;
  for (int i = 0; i < n; ++i) {
    const double ci = std::cos(theta[i]), si = std::sin(theta[i]);
    const double cj = std::cos(theta[i + 1]), sj = std::sin(theta[i + 1]);
    double bx = px[i + 1] - px[i];
    double by = py[i + 1] - py[i];
    if (i == 0) {
      bx -= half_dt * initial.v * ci;
      by -= half_dt * initial.v * si;
    } else {
      a_mat(2 * i, i - 1) = half_dt * ci;
      a_mat(2 * i + 1, i - 1) = half_dt * si;
    }
    a_mat(2 * i, i) = half_dt * cj;
    a_mat(2 * i + 1, i) = half_dt * sj;
    b_vec(2 * i) = bx;
    b_vec(2 * i + 1) = by;
  }
  // The trapezoid couples only neighboring speeds, which leaves an
  // alternating +/- mode nearly unobserved; a small second-difference ridge
  // inside the least squares pins it down before it amplifies noise.
  Eigen::MatrixXd normal = a_mat.transpose() * a_mat;
  const double v_ridge = 1e-3 * cfg.tikhonov_lambda;
  if (v_ridge > 0.0) {
    for (int r = 0; r + 2 < n; ++r) {
      const double pattern[3] = {1.0, -2.0, 1.0};
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
          normal(r + p, r + q) += v_ridge * pattern[p] * pattern[q];
        }
      }
    }
  }
  Eigen::VectorXd v_fit = normal.ldlt().solve(a_mat.transpose() * b_vec);

  std::vector<double> v(n + 1);
  v[0] = initial.v;
  for (int i = 0; i < n; ++i) v[i + 1] = v_fit(i);

  // Per-step inversion of the recurrence.
  std::vector<double> a_raw(n), kappa_raw(n);
  double prev_kappa = 0.0;
  for (int i = 0; i < n; ++i) {
    a_raw[i] = (v[i + 1] - v[i]) / dt;
    const double denom = dt * v[i] + 0.5 * dt * dt * a_raw[i];
    if (std::abs(denom) < cfg.v_epsilon * dt) {
      kappa_raw[i] = prev_kappa;  // curvature unobservable near standstill
    } else {
      kappa_raw[i] = wrap_angle(theta[i + 1] - theta[i]) / denom;
    }
    prev_kappa = kappa_raw[i];
  }

  std::vector<double> a_smooth = ridge_smooth(a_raw, cfg.tikhonov_lambda);
  std::vector<double> k_smooth = ridge_smooth(kappa_raw, cfg.tikhonov_lambda);

  ControlSequence out;
  out.dt = dt;
  out.controls.resize(n);
  for (int i = 0; i < n; ++i) {
    out.controls[i].a = clamp(a_smooth[i], -cfg.a_bound, cfg.a_bound);
    out.controls[i].kappa =
        clamp(k_smooth[i], -cfg.kappa_bound, cfg.kappa_bound);
  }
  return out;
}

std::vector<double> jerk_profile(const ControlSequence& controls) {
  const double inf = std::numeric_limits<double>::infinity();
  validate(controls, inf, inf, "jerk_profile");
  std::vector<double> jerks;
  jerks.reserve(controls.controls.size() - 1);
  for (size_t i = 0; i + 1 < controls.controls.size(); ++i) {
    jerks.push_back((controls.controls[i + 1].a - controls.controls[i].a) /
                    controls.dt);
  }
  return jerks;
}

}  // namespace driveline

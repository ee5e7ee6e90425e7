#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "driveline/episode.hpp"
#include "driveline/traj.hpp"

namespace driveline::testing {

inline ControlSequence constant_controls(double a, double kappa) {
  ControlSequence c;
  c.controls.assign(kHorizon, Control{a, kappa});
  return c;
}

// Low-frequency in-bound controls: a few sine harmonics per channel, so the
// ridge smoother barely moves them and speeds stay positive with v0 >= 6.
inline ControlSequence smooth_random_controls(std::mt19937_64& rng,
                                              double a_amp = 0.8,
                                              double kappa_amp = 0.08) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  ControlSequence c;
  c.controls.resize(kHorizon);
  double pa[3], pk[3], aa[3], ak[3];
  for (int h = 0; h < 3; ++h) {
    pa[h] = phase(rng);
    pk[h] = phase(rng);
    aa[h] = amp(rng) * a_amp / 3.0;
    ak[h] = amp(rng) * kappa_amp / 3.0;
  }
  for (int i = 0; i < kHorizon; ++i) {
    double a = 0.0, k = 0.0;
    for (int h = 0; h < 3; ++h) {
      const double w = 2.0 * 3.14159265358979 * (h + 1) * i / kHorizon;
      a += aa[h] * std::sin(w + pa[h]);
      k += ak[h] * std::sin(w + pk[h]);
    }
    c.controls[i] = {a, k};
  }
  return c;
}

inline std::vector<Vec2> square_polygon(double half_size) {
  return {{-half_size, -half_size},
          {half_size, -half_size},
          {half_size, half_size},
          {-half_size, half_size}};
}

// Episode on an empty huge lot with the given ego controls.
inline Episode make_episode(const ControlSequence& controls, double v0,
                            double lot_half_size = 1000.0) {
  Episode episode;
  episode.id = "test";
  episode.ego = integrate_controls(EgoState{0.0, 0.0, 0.0, v0}, controls);
  episode.agents.resize(episode.ego.waypoints.size());
  episode.drivable = square_polygon(lot_half_size);
  return episode;
}

inline AgentBox vehicle_at(double x, double y, int id = 0,
                           double heading = 0.0) {
  AgentBox a;
  a.box = {x, y, heading, 4.8, 2.0};
  a.cls = AgentClass::Vehicle;
  a.id = id;
  return a;
}

inline AgentBox pedestrian_at(double x, double y, int id = 100) {
  AgentBox a;
  a.box = {x, y, 0.0, 0.6, 0.6};
  a.cls = AgentClass::Pedestrian;
  a.id = id;
  return a;
}

}  // namespace driveline::testing

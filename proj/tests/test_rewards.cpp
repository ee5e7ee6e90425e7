#include <doctest.h>

#include <cmath>
#include <random>

#include "driveline/errors.hpp"
#include "driveline/geometry.hpp"
#include "driveline/rewards.hpp"
#include "driveline/util.hpp"
#include "helpers.hpp"

using namespace driveline;
using namespace driveline::testing;

namespace {

bool point_in_obb(const Vec2& p, const OrientedBox& box) {
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double dx = p.x - box.cx, dy = p.y - box.cy;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * box.length && std::abs(ly) <= 0.5 * box.width;
}

// Dense grid of one box's interior points checked against the other box.
bool sampling_overlap(const OrientedBox& a, const OrientedBox& b) {
  const int n = 60;
  auto scan = [&](const OrientedBox& from, const OrientedBox& to) {
    const double c = std::cos(from.heading), s = std::sin(from.heading);
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double lx = (-0.5 + static_cast<double>(i) / n) * from.length;
        const double ly = (-0.5 + static_cast<double>(j) / n) * from.width;
        const Vec2 p{from.cx + c * lx - s * ly, from.cy + s * lx + c * ly};
        if (point_in_obb(p, to)) return true;
      }
    }
    return false;
  };
  return scan(a, b) || scan(b, a);
}

}  // namespace

TEST_CASE("separating-axis basics") {
  const OrientedBox a{0, 0, 0, 4, 2};
  CHECK(obb_overlap(a, a));
  CHECK(obb_overlap(a, OrientedBox{1, 0.5, 0.3, 4, 2}));
  CHECK_FALSE(obb_overlap(a, OrientedBox{10, 0, 0, 4, 2}));
  // A 0.01 m gap on the x axis.
  CHECK_FALSE(obb_overlap(a, OrientedBox{4.01, 0, 0, 4, 2}));
  CHECK(obb_gap(a, OrientedBox{4.01, 0, 0, 4, 2}) ==
        doctest::Approx(0.01).epsilon(1e-9));
  // Diagonal neighbor rotated 45 degrees, clearly separated.
  CHECK_FALSE(obb_overlap(a, OrientedBox{5, 5, kPi / 4, 4, 2}));
  CHECK(obb_gap(a, a) == 0.0);
}

TEST_CASE("SAT agrees with a dense sampling oracle on random pairs") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> ext(1.0, 5.0);
  int overlaps = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const OrientedBox a{pos(rng), pos(rng), ang(rng), ext(rng), ext(rng)};
    const OrientedBox b{pos(rng), pos(rng), ang(rng), ext(rng), ext(rng)};
    const bool sat = obb_overlap(a, b);
    CHECK(sat == sampling_overlap(a, b));
    overlaps += sat ? 1 : 0;
  }
  // The fixture actually exercises both verdicts.
  CHECK(overlaps > 100);
  CHECK(overlaps < 900);
}

TEST_CASE("collision indicator poses the ego box along the trajectory") {
  const Trajectory traj =
      integrate_controls(EgoState{0, 0, 0, 5.0}, constant_controls(0.0, 0.0));
  OrientedBox ego;
  CHECK(collision_indicator(traj, ego, {}) == 0);

  std::vector<std::vector<AgentBox>> agents(kHorizon);
  agents[30].push_back(vehicle_at(traj.waypoints[30].x, 0.0));
  CHECK(collision_indicator(traj, ego, agents) == 1);

  // The same agent far off to the side on every frame.
  std::vector<std::vector<AgentBox>> clear(kHorizon);
  for (auto& frame : clear) frame.push_back(vehicle_at(0.0, 50.0));
  CHECK(collision_indicator(traj, ego, clear) == 0);

  std::vector<std::vector<AgentBox>> wrong_horizon(10);
  CHECK_THROWS_AS(collision_indicator(traj, ego, wrong_horizon),
                  ValidationError);
}

TEST_CASE("intent/meta-action compatibility tables") {
  CHECK(lon_intent_matches(LonIntent::Accelerate, LonAction::GentleAccelerate));
  CHECK(lon_intent_matches(LonIntent::Accelerate, LonAction::StrongAccelerate));
  CHECK_FALSE(lon_intent_matches(LonIntent::Accelerate, LonAction::Stop));
  CHECK(lon_intent_matches(LonIntent::Decelerate, LonAction::Stop));
  CHECK(lon_intent_matches(LonIntent::Stop, LonAction::Stop));
  CHECK_FALSE(lon_intent_matches(LonIntent::Stop, LonAction::GentleDecelerate));
  CHECK_FALSE(lon_intent_matches(LonIntent::Unknown, LonAction::MaintainSpeed));
  CHECK(lat_intent_matches(LatIntent::Left, LatAction::SharpSteerLeft));
  CHECK(lat_intent_matches(LatIntent::Right, LatAction::ReverseRight));
  CHECK_FALSE(lat_intent_matches(LatIntent::Unknown, LatAction::GoStraight));
}

TEST_CASE("consistency reward follows the dominant window label") {
  const MetaActionProfile stopping = [] {
    const ControlSequence c = constant_controls(0.0, 0.0);
    const Trajectory traj = integrate_controls(EgoState{0, 0, 0, 0.0}, c);
    return detect_meta_actions(traj, c, DetectorConfig{});
  }();
  CHECK(consistency_reward({LonIntent::Stop, LatIntent::Straight},
                           stopping) == 1);
  CHECK(consistency_reward({LonIntent::Accelerate, LatIntent::Straight},
                           stopping) == 0);
  CHECK(consistency_reward({LonIntent::Unknown, LatIntent::Straight},
                           stopping) == 0);
  CHECK(consistency_reward({LonIntent::Stop, LatIntent::Unknown}, stopping) ==
        0);
}

TEST_CASE("the Stop override beats the frame majority") {
  // 12 stopped frames then cruising: majority is MaintainSpeed but Stop
  // holds for longer than the override threshold.
  ControlSequence controls = constant_controls(0.0, 0.0);
  for (int i = 12; i < 16; ++i) controls.controls[i].a = 2.5;
  const Trajectory traj = integrate_controls(EgoState{0, 0, 0, 0.0}, controls);
  const MetaActionProfile profile =
      detect_meta_actions(traj, controls, DetectorConfig{});
  CHECK(consistency_reward({LonIntent::Stop, LatIntent::Straight}, profile, 0,
                           30, 10) == 1);
  CHECK(consistency_reward({LonIntent::Stop, LatIntent::Straight}, profile, 0,
                           30, 13) == 0);
}

TEST_CASE("paraphrases with the same parsed intent score identically") {
  // The two template families word the same decision differently; the
  // consistency reward must not depend on the wording.
  DrivingDecision decision;
  decision.longitudinal = LonDecision::Yield;
  decision.lateral = LatDecision::LaneKeeping;
  CriticalComponent cause;
  cause.attributes["phrase"] = "a pedestrian is crossing ahead";
  std::vector<std::string> variants;
  for (uint64_t seed = 0; variants.size() < 2 && seed < 32; ++seed) {
    std::mt19937_64 rng(seed);
    const std::string trace = compose_trace(decision, {cause}, rng);
    if (std::find(variants.begin(), variants.end(), trace) == variants.end()) {
      variants.push_back(trace);
    }
  }
  REQUIRE(variants.size() == 2);
  CHECK(parse_intent(variants[0]) == parse_intent(variants[1]));

  const ControlSequence braking = constant_controls(-1.0, 0.0);
  const Trajectory traj = integrate_controls(EgoState{0, 0, 0, 15.0}, braking);
  const MetaActionProfile profile =
      detect_meta_actions(traj, braking, DetectorConfig{});
  CHECK(consistency_reward(parse_intent(variants[0]), profile) ==
        consistency_reward(parse_intent(variants[1]), profile));
  CHECK(consistency_reward(parse_intent(variants[0]), profile) == 1);
}

TEST_CASE("trajectory quality vanishes for a perfect constant-speed match") {
  const Trajectory traj =
      integrate_controls(EgoState{0, 0, 0, 8.0}, constant_controls(0.0, 0.0));
  const double q = traj_quality(traj, traj, {}, RewardWeights{});
  CHECK(std::abs(q) < 1e-9);
}

TEST_CASE("a one-meter offset costs exactly its mean square") {
  const Trajectory expert =
      integrate_controls(EgoState{0, 0, 0, 8.0}, constant_controls(0.0, 0.0));
  Trajectory pred = expert;
  for (Waypoint& w : pred.waypoints) w.y += 1.0;
  RewardWeights weights;
  weights.lambda_l2 = 1.0;
  weights.lambda_coll = 0.0;
  weights.lambda_jerk = 0.0;
  CHECK(traj_quality(pred, expert, {}, weights) == doctest::Approx(-1.0));
}

TEST_CASE("a collision dominates the quality with its weight") {
  const Trajectory expert =
      integrate_controls(EgoState{0, 0, 0, 8.0}, constant_controls(0.0, 0.0));
  std::vector<std::vector<AgentBox>> agents(kHorizon);
  agents[20].push_back(vehicle_at(expert.waypoints[20].x, 0.0));
  RewardWeights weights;
  weights.lambda_coll = 10.0;
  CHECK(traj_quality(expert, expert, agents, weights) <= -10.0);
}

TEST_CASE("quality is monotone in each weight") {
  std::mt19937_64 rng(103);
  const ControlSequence controls = smooth_random_controls(rng);
  const Trajectory expert =
      integrate_controls(EgoState{0, 0, 0, 9.0}, controls);
  Trajectory pred = expert;
  for (Waypoint& w : pred.waypoints) w.y += 0.3;
  RewardWeights weights;
  double prev = traj_quality(pred, expert, {}, weights);
  for (double scale : {2.0, 4.0, 8.0}) {
    RewardWeights w2;
    w2.lambda_l2 = scale;
    w2.lambda_jerk = 0.01 * scale;
    const double q = traj_quality(pred, expert, {}, w2);
    CHECK(q <= prev + 1e-12);
    prev = q;
  }
}

TEST_CASE("quality is invariant under a rigid transform of the whole scene") {
  std::mt19937_64 rng(107);
  const ControlSequence controls = smooth_random_controls(rng);
  const Trajectory expert =
      integrate_controls(EgoState{0, 0, 0, 9.0}, controls);
  Trajectory pred = expert;
  for (Waypoint& w : pred.waypoints) w.y += 0.5;
  std::vector<std::vector<AgentBox>> agents(kHorizon);
  for (size_t f = 0; f < agents.size(); ++f) {
    agents[f].push_back(vehicle_at(expert.waypoints[f].x + 10.0, 3.0));
  }

  const double base = traj_quality(pred, expert, agents, RewardWeights{});

  const double dx = 113.0, dy = -41.0, rot = 0.7;
  auto transform_traj = [&](const Trajectory& t) {
    Trajectory out = t;
    for (Waypoint& w : out.waypoints) {
      const double x = std::cos(rot) * w.x - std::sin(rot) * w.y + dx;
      const double y = std::sin(rot) * w.x + std::cos(rot) * w.y + dy;
      w.x = x;
      w.y = y;
      w.yaw = wrap_angle(w.yaw + rot);
    }
    return out;
  };
  std::vector<std::vector<AgentBox>> moved(kHorizon);
  for (size_t f = 0; f < agents.size(); ++f) {
    for (AgentBox a : agents[f]) {
      const double x = std::cos(rot) * a.box.cx - std::sin(rot) * a.box.cy + dx;
      const double y = std::sin(rot) * a.box.cx + std::cos(rot) * a.box.cy + dy;
      a.box.cx = x;
      a.box.cy = y;
      a.box.heading = wrap_angle(a.box.heading + rot);
      moved[f].push_back(a);
    }
  }
  const EgoState anchor{dx, dy, rot, pred.v0};
  const double transformed =
      traj_quality(transform_traj(pred), transform_traj(expert), moved,
                   RewardWeights{}, RewardConfig{}, anchor);
  CHECK(transformed == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("total reward composes the three terms") {
  MockJudge judge;
  RewardConfig cfg;
  const Trajectory expert =
      integrate_controls(EgoState{0, 0, 0, 0.0}, constant_controls(0.0, 0.0));
  RewardRollout rollout{"stopping for the crosswalk and keeping the lane",
                        expert};
  RewardReference gt{"stopping for the crosswalk and keeping the lane",
                     expert};

  const RewardBreakdown perfect = total_reward(rollout, gt, {}, cfg, judge);
  CHECK(perfect.r_reason == 5);
  CHECK(perfect.r_consistency == 1);
  CHECK(std::abs(perfect.r_traj) < 1e-9);
  CHECK(perfect.total == doctest::Approx(cfg.judge_weight * 5 +
                                         cfg.consistency_weight));

  // Fluent trace, opposite motion: the trace promises acceleration but the
  // trajectory stays stopped.
  RewardRollout inconsistent{"accelerating to pass while keeping the lane",
                             expert};
  RewardReference accel_gt{"accelerating to pass while keeping the lane",
                           expert};
  const RewardBreakdown b =
      total_reward(inconsistent, accel_gt, {}, cfg, judge);
  CHECK(b.r_reason == 5);
  CHECK(b.r_consistency == 0);

  // Gibberish trace: low rubric score and conservative consistency.
  RewardRollout garbage{"zx qv bnm", expert};
  const RewardBreakdown g = total_reward(garbage, gt, {}, cfg, judge);
  CHECK(g.r_reason <= 1);
  CHECK(g.r_consistency == 0);
  CHECK(g.r_traj == doctest::Approx(perfect.r_traj));
}

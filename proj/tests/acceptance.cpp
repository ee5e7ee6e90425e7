// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driveline/codec.hpp"
#include "driveline/coc.hpp"
#include "driveline/flow.hpp"
#include "driveline/grpo.hpp"
#include "driveline/json_io.hpp"
#include "driveline/judge.hpp"
#include "driveline/meta.hpp"
#include "driveline/metrics.hpp"
#include "driveline/rewards.hpp"
#include "driveline/traj.hpp"
#include "driveline/util.hpp"

using namespace driveline;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure(message);
}

ControlSequence constant_controls(double a, double kappa) {
  ControlSequence c;
  c.controls.assign(kHorizon, Control{a, kappa});
  return c;
}

ControlSequence smooth_random_controls(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  ControlSequence c;
  c.controls.resize(kHorizon);
  double pa[3], pk[3], aa[3], ak[3];
  for (int h = 0; h < 3; ++h) {
    pa[h] = phase(rng);
    pk[h] = phase(rng);
    aa[h] = amp(rng) * 0.8 / 3.0;
    ak[h] = amp(rng) * 0.08 / 3.0;
  }
  for (int i = 0; i < kHorizon; ++i) {
    double a = 0.0, k = 0.0;
    for (int h = 0; h < 3; ++h) {
      const double w = 2.0 * kPi * (h + 1) * i / kHorizon;
      a += aa[h] * std::sin(w + pa[h]);
      k += ak[h] * std::sin(w + pk[h]);
    }
    c.controls[i] = {a, k};
  }
  return c;
}

double mean_distance(const Trajectory& a, const Trajectory& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.waypoints.size(); ++i) {
    sum += std::hypot(a.waypoints[i].x - b.waypoints[i].x,
                      a.waypoints[i].y - b.waypoints[i].y);
  }
  return sum / a.waypoints.size();
}

// ---- criterion bodies ------------------------------------------------

void criterion_dynamics_exactness() {
  const Trajectory traj =
      integrate_controls(EgoState{}, constant_controls(1.0, 0.0));
  require(std::abs(traj.waypoints[9].x - 0.5) < 1e-9,
          "displacement after 1 s must be 0.5 m within 1e-9");
  require(std::abs(traj.waypoints[9].y) < 1e-12, "no lateral drift");
}

void criterion_dynamics_round_trip() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> speed(6.0, 15.0);
  const FitConfig cfg;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ControlSequence truth = smooth_random_controls(rng);
    const EgoState initial{0, 0, 0, speed(rng)};
    const Trajectory traj = integrate_controls(initial, truth);
    const Trajectory replay =
        integrate_controls(initial, fit_controls(traj, cfg));
    const double err = mean_distance(replay, traj);
    worst = std::max(worst, err);
    require(err < 0.05, "round-trip ADE must stay below 0.05 m (case " +
                            std::to_string(trial) + " reached " +
                            std::to_string(err) + ")");
  }
  std::cout << "      worst round-trip ADE over 1000 cases: " << worst
            << " m\n";
}

void criterion_quantizer() {
  const QuantizerSpec spec;
  const double half_a = (spec.a_hi - spec.a_lo) / spec.bins / 2.0;
  const double half_k = (spec.kappa_hi - spec.kappa_lo) / spec.bins / 2.0;
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> a_dist(spec.a_lo, spec.a_hi);
  std::uniform_real_distribution<double> k_dist(spec.kappa_lo, spec.kappa_hi);
  for (int trial = 0; trial < 10000; ++trial) {
    ControlSequence c;
    c.controls.resize(kHorizon);
    for (Control& u : c.controls) u = {a_dist(rng), k_dist(rng)};
    const QuantizeResult q = quantize(c, spec);
    require(static_cast<int>(q.seq.tokens.size()) == 128,
            "token count must be exactly 128 per trajectory");
    const ControlSequence back = dequantize(q.seq, spec);
    for (int i = 0; i < kHorizon; ++i) {
      require(std::abs(back.controls[i].a - c.controls[i].a) <=
                  half_a + 1e-12,
              "acceleration round-trip must stay within half a bin");
      require(std::abs(back.controls[i].kappa - c.controls[i].kappa) <=
                  half_k + 1e-12,
              "curvature round-trip must stay within half a bin");
    }
  }
}

void criterion_flow_matching() {
  // (a) Exact target field: Euler lands on the data point for both step
  // sizes. On the linear path the true field is constant, so the only error
  // is floating-point accumulation.
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd target(kTokensPerTrajectory), a0(kTokensPerTrajectory);
  for (int i = 0; i < kTokensPerTrajectory; ++i) target(i) = gauss(rng);
  for (int i = 0; i < kTokensPerTrajectory; ++i) a0(i) = gauss(rng);
  const Eigen::VectorXd no_cond = Eigen::VectorXd::Zero(0);
  for (double delta : {0.1, 0.2}) {
    FieldFn oracle = [&](const Eigen::VectorXd&, const Eigen::VectorXd&,
                         double) { return target - a0; };
    const Eigen::VectorXd landed = euler_integrate(oracle, a0, no_cond, delta);
    require((landed - target).norm() < 1e-9,
            "exact-field Euler must land on the data point");
  }

  QuantizerSpec wide;
  wide.a_lo = wide.kappa_lo = -100.0;
  wide.a_hi = wide.kappa_hi = 100.0;

  // (b) Fixed-target recovery within L2 0.1 at delta_t = 0.1. Training
  // samples t uniformly over the interval the sampler queries.
  {
    VectorFieldNet net(kTokensPerTrajectory, 2, 256, 16);
    net.init_weights(2024);
    Eigen::VectorXd fixed(kTokensPerTrajectory);
    for (int i = 0; i < kTokensPerTrajectory; ++i) {
      fixed(i) = 1.2 * std::sin(0.21 * i) - 0.3;
    }
    FlowDataset data;
    data.actions.push_back(fixed);
    data.conditions.push_back(Eigen::VectorXd::Zero(2));
    FlowTrainOptions opts;
    opts.iterations = 8000;
    opts.batch_size = 64;
    opts.learning_rate = 5e-3;
    opts.final_lr_fraction = 0.01;
    opts.schedule = ScheduleSpec{1.0, 1.0, 0.9};
    opts.seed = 7;
    train_fm(&net, data, opts);
    std::mt19937_64 sample_rng(99);
    double worst = 0.0;
    for (int s = 0; s < 5; ++s) {
      const ControlSequence sample =
          euler_sample(net, Eigen::VectorXd::Zero(2), 0.1, sample_rng, wide);
      worst = std::max(worst, (flatten_controls(sample) - fixed).norm());
    }
    std::cout << "      fixed-target worst L2 over 5 samples: " << worst
              << "\n";
    require(worst < 0.1, "trained net must recover the fixed target within "
                         "L2 0.1 (got " + std::to_string(worst) + ")");
  }

  // (c) Two modes under one shared condition: the noise draw picks the mode;
  // both must appear in at least 20% of 100 seeded samples.
  {
    VectorFieldNet net(kTokensPerTrajectory, 2, 128, 16);
    net.init_weights(2025);
    Eigen::VectorXd mode_a = Eigen::VectorXd::Constant(kTokensPerTrajectory, 1.0);
    Eigen::VectorXd mode_b =
        Eigen::VectorXd::Constant(kTokensPerTrajectory, -1.0);
    const Eigen::VectorXd shared = Eigen::VectorXd::Zero(2);
    FlowDataset data;
    data.actions = {mode_a, mode_b};
    data.conditions = {shared, shared};
    FlowTrainOptions opts;
    opts.iterations = 1200;
    opts.batch_size = 64;
    opts.learning_rate = 3e-3;
    opts.schedule = ScheduleSpec{1.0, 1.0, 0.9};
    opts.seed = 11;
    train_fm(&net, data, opts);

    const double gate = (mode_a - mode_b).norm() / 4.0;
    int hits_a = 0, hits_b = 0;
    for (int s = 0; s < 100; ++s) {
      std::mt19937_64 seed_rng(5000 + s);
      const ControlSequence sample =
          euler_sample(net, shared, 0.1, seed_rng, wide);
      const Eigen::VectorXd v = flatten_controls(sample);
      if ((v - mode_a).norm() < gate) ++hits_a;
      if ((v - mode_b).norm() < gate) ++hits_b;
    }
    std::cout << "      mode hits out of 100 samples: " << hits_a << " / "
              << hits_b << "\n";
    require(hits_a >= 20, "first mode must be hit in at least 20% of samples");
    require(hits_b >= 20, "second mode must be hit in at least 20% of samples");
  }
}

template <typename LossFn>
void check_gradients(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                     LossFn loss, const char* what) {
  const double h = 1e-6;
  for (int p = 0; p < params.size(); ++p) {
    const double saved = params(p);
    params(p) = saved + h;
    const double up = loss();
    params(p) = saved - h;
    const double down = loss();
    params(p) = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(fd) + std::abs(grad(p)));
    require(std::abs(fd - grad(p)) / denom < 1e-4,
            std::string(what) + ": analytic/finite-difference mismatch at "
                                "parameter " + std::to_string(p));
  }
}

void criterion_gradient_checks() {
  // cfm_loss on a tiny vector-field net.
  {
    VectorFieldNet net(6, 2, 5, 4);
    net.init_weights(31);
    std::mt19937_64 rng(33);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd a(6), eps(6), cond(2);
    for (int i = 0; i < 6; ++i) a(i) = gauss(rng);
    for (int i = 0; i < 6; ++i) eps(i) = gauss(rng);
    for (int i = 0; i < 2; ++i) cond(i) = gauss(rng);
    Eigen::VectorXd grad;
    cfm_loss_at(net, a, cond, 0.37, eps, &grad);
    check_gradients(net.params(), grad,
                    [&] { return cfm_loss_at(net, a, cond, 0.37, eps); },
                    "cfm_loss");
  }
  // sft_loss on a tiny policy.
  {
    ToyPolicy policy(5, 3, 2, 4);
    policy.init_weights(35, 0.4);
    Eigen::VectorXd ctx(2);
    ctx << 0.4, -0.6;
    const std::vector<std::vector<int>> data = {{0, 2, 4}, {1, 3, 0}};
    Eigen::VectorXd grad(policy.params().size());
    sft_loss(policy, data, ctx, &grad);
    check_gradients(policy.params(), grad,
                    [&] { return sft_loss(policy, data, ctx); }, "sft_loss");
  }
  // grpo_loss with a distinct reference policy and a KL term.
  {
    ToyPolicy policy(5, 3, 2, 4);
    policy.init_weights(37, 0.4);
    ToyPolicy ref(5, 3, 2, 4);
    ref.init_weights(39, 0.4);
    Eigen::VectorXd ctx(2);
    ctx << -0.1, 0.9;
    RolloutGroup group;
    group.beta = 0.8;
    group.lambda_kl = 0.25;
    int base = 0;
    for (double reward : {1.0, 0.2, 0.6}) {
      GrpoRollout r;
      r.tokens = {base % 5, (base + 1) % 5, (base + 3) % 5};
      r.reward = reward;
      ++base;
      group.rollouts.push_back(r);
    }
    Eigen::VectorXd grad(policy.params().size());
    grpo_loss(policy, ref, group, ctx, &grad);
    check_gradients(policy.params(), grad,
                    [&] { return grpo_loss(policy, ref, group, ctx); },
                    "grpo_loss");
  }
}

void criterion_grpo_arithmetic() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> reward(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    RolloutGroup group;
    for (int k = 0; k < 6; ++k) {
      GrpoRollout r;
      r.reward = reward(rng);
      group.rollouts.push_back(r);
    }
    double sum = 0.0;
    for (double a : advantages(group)) sum += a;
    require(std::abs(sum) < 1e-9, "advantages must sum to zero within 1e-9");
  }

  const std::vector<double> uniform = group_weights({2.0, -1.0, 0.3, 7.0}, 0.0);
  for (double w : uniform) {
    require(w == 0.25, "beta = 0 must give exactly uniform weights");
  }

  // Exactly representable rewards and shift: the max-shift softmax is
  // bit-identical under the translation.
  RolloutGroup base, shifted;
  for (double r : {1.0, 2.5, 3.25, -0.75}) {
    GrpoRollout a;
    a.reward = r;
    base.rollouts.push_back(a);
    GrpoRollout b;
    b.reward = r + 128.0;
    shifted.rollouts.push_back(b);
  }
  const std::vector<double> w1 = group_weights(advantages(base), 1.0);
  const std::vector<double> w2 = group_weights(advantages(shifted), 1.0);
  for (size_t i = 0; i < w1.size(); ++i) {
    require(w1[i] == w2[i], "reward shift must leave the weights bit-exact");
  }
}

void criterion_grpo_improvement() {
  GrpoDemoOptions opts;  // 200 iterations, 5 seeds
  const GrpoDemoReport report = run_grpo_demo(opts);
  std::cout << "      mean reward " << report.initial_reward << " -> "
            << report.final_reward << " over " << opts.num_seeds
            << " seeds\n";
  require(report.initial_reward > 0.0,
          "the SFT-initialized policy must already score sometimes");
  require(report.final_reward >= 1.5 * report.initial_reward,
          "mean group reward must improve by at least 50%");
}

void criterion_consistency_fixtures() {
  DetectorConfig det;
  auto profile_for = [&](const ControlSequence& c, double v0) {
    const Trajectory traj = integrate_controls(EgoState{0, 0, 0, v0}, c);
    return detect_meta_actions(traj, c, det);
  };
  struct Fixture {
    const char* trace;
    ControlSequence controls;
    double v0;
    int expected;
  };
  ControlSequence stop_then_wait = constant_controls(0.0, 0.0);
  const std::vector<Fixture> fixtures = {
      // Matching pairs across the intent classes.
      {"accelerating to pass while keeping the lane",
       constant_controls(1.0, 0.0), 5.0, 1},
      {"slowing to open a gap and keeping the lane",
       constant_controls(-1.0, 0.0), 15.0, 1},
      {"stopping for the stop line and keeping the lane", stop_then_wait, 0.0,
       1},
      {"maintaining the set speed and keeping the lane",
       constant_controls(0.0, 0.0), 10.0, 1},
      {"reversing while going straight ahead", constant_controls(0.0, 0.0),
       -2.0, 1},
      {"maintaining the set speed and turning left",
       constant_controls(0.0, 0.05), 8.0, 1},
      {"maintaining the set speed and turning right",
       constant_controls(0.0, -0.05), 8.0, 1},
      // Contradictions.
      {"accelerating to pass while keeping the lane", stop_then_wait, 0.0, 0},
      {"stopping for the crosswalk and keeping the lane",
       constant_controls(1.0, 0.0), 8.0, 0},
      {"maintaining the set speed and turning left",
       constant_controls(0.0, -0.05), 8.0, 0},
      // The Unknown -> 0 rule on either axis.
      {"qwerty asdf and turning left", constant_controls(0.0, 0.05), 8.0, 0},
      {"maintaining the set speed with zero lateral words",
       constant_controls(0.0, 0.0), 10.0, 0},
  };
  require(fixtures.size() == 12, "the fixture suite holds 12 pairs");
  for (size_t i = 0; i < fixtures.size(); ++i) {
    const Fixture& f = fixtures[i];
    const ParsedIntent intent = parse_intent(f.trace);
    const int got =
        consistency_reward(intent, profile_for(f.controls, f.v0), 0, 30, 10);
    require(got == f.expected,
            "fixture " + std::to_string(i) + " expected " +
                std::to_string(f.expected) + ", got " + std::to_string(got));
  }
}

void criterion_compose_parse_closure() {
  std::mt19937_64 rng(1009);
  std::vector<std::optional<LonDecision>> lons = {std::nullopt};
  for (LonDecision d : all_lon_decisions()) lons.push_back(d);
  std::vector<std::optional<LatDecision>> lats = {std::nullopt};
  for (LatDecision d : all_lat_decisions()) lats.push_back(d);
  int cases = 0;
  for (const auto& lon : lons) {
    for (const auto& lat : lats) {
      std::vector<std::optional<Side>> sides = {std::nullopt};
      if (lat && side_allowed(*lat)) {
        sides = {Side::Left, Side::Right};
      }
      for (const auto& side : sides) {
        DrivingDecision d;
        d.longitudinal = lon;
        d.lateral = lat;
        d.side = side;
        if (d.none()) continue;
        if (d.lateral && side_required(*d.lateral) && !d.side) continue;
        const std::string trace = compose_trace(d, {}, rng);
        const ParsedIntent parsed = parse_intent(trace);
        const ParsedIntent projected = project_intent(d);
        require(parsed == projected,
                "closure failure for trace \"" + trace + "\"");
        ++cases;
      }
    }
  }
  require(cases >= 7 * 8, "the grid must cover at least the 7x8 decisions");
  std::cout << "      closure checked over " << cases << " decision cases\n";
}

void criterion_metrics() {
  // minADE with the ground truth among the candidates.
  const Trajectory gt =
      integrate_controls(EgoState{0, 0, 0, 5.0}, constant_controls(0.0, 0.0));
  Trajectory off = gt;
  for (Waypoint& w : off.waypoints) w.y += 2.0;
  require(min_ade({off, gt}, gt, 6.0) == 0.0,
          "minADE with gt among candidates must be 0");

  // 10 km and 4 counted events score 2.5 km.
  std::vector<EventLog> logs;
  for (int i = 0; i < 4; ++i) {
    EventLog log;
    log.km_driven = 2.5;
    log.events.push_back({int(10 + i), EventKind::CloseEncounter, true, false});
    logs.push_back(log);
  }
  require(closed_loop_summary(logs).score_km == 2.5,
          "10 km over 4 events must score 2.5 km");

  // Rear-end exclusion changes only the at-fault score.
  std::vector<EventLog> rear = logs;
  rear[0].events[0].at_fault = false;
  rear[1].events[0].at_fault = false;
  const ClosedLoopSummary with_rear = closed_loop_summary(rear);
  require(with_rear.score_km == 2.5, "score_km must ignore fault labels");
  require(with_rear.score_at_fault_km == 5.0,
          "score_at_fault must drop rear-end encounters");

  // A 4 m deviation flips excluded and removes the event from the rates.
  Episode episode;
  episode.id = "deviation";
  episode.ego =
      integrate_controls(EgoState{0, 0, 0, 10.0}, constant_controls(0.0, 0.0));
  episode.agents.resize(kHorizon);
  episode.drivable = {{-1000.0, -1000.0},
                      {1000.0, -1000.0},
                      {1000.0, 1000.0},
                      {-1000.0, 1000.0}};
  Trajectory policy = episode.ego;
  episode.agents[20].push_back(AgentBox{
      OrientedBox{episode.ego.waypoints[20].x, 0.0, 0.0, 4.8, 2.0},
      AgentClass::Vehicle, 1});
  const EventLog nominal = run_episode_metrics(episode, policy);
  require(nominal.events.size() == 1 && !nominal.events[0].excluded,
          "the on-log policy must produce a counted encounter");
  for (Waypoint& w : policy.waypoints) w.y += 4.5;
  episode.agents[20].clear();
  episode.agents[20].push_back(AgentBox{
      OrientedBox{policy.waypoints[20].x, policy.waypoints[20].y, 0.0, 4.8,
                  2.0},
      AgentClass::Vehicle, 1});
  const EventLog deviated = run_episode_metrics(episode, policy);
  require(deviated.events.size() == 1 && deviated.events[0].excluded,
          "a 4 m deviation must flip the excluded flag");
  const ClosedLoopSummary excluded = closed_loop_summary({deviated});
  require(excluded.close_encounter_rate == 0.0,
          "excluded events must vanish from the rates");
}

void criterion_token_budget() {
  require(single_image_token_budget(448, 280).total_tokens == 160,
          "448x280 single-image budget must be 160 tokens");
  const TokenBudget triplane = triplane_token_budget(96, 96, 48, 8, 8, 8, 7);
  require(triplane.total_tokens == 288,
          "triplane 96/96/48 with patch 8 must be 288 tokens");
  require(std::abs(triplane.per_image - 288.0 / 7.0) < 1e-12 &&
              std::abs(triplane.per_image - 41.14) < 0.005,
          "288 tokens over 7 cameras must be 41.14 per image");
}

// ---- criterion 12: CLI determinism ------------------------------------

std::string cli_binary() {
  if (const char* env = std::getenv("DRIVELINE_CLI")) return env;
  return "./tools/driveline";
}

int shell(const std::string& command) {
  return WEXITSTATUS(std::system(command.c_str()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "missing output file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void criterion_cli_determinism() {
  const std::string dir = "/tmp/driveline_acc";
  shell("rm -rf " + dir + " && mkdir -p " + dir);
  const std::string bin = cli_binary();

  // Fixtures.
  json controls = controls_to_json(constant_controls(0.5, 0.01));
  controls["initial"] = {{"v", 5.0}};
  write_file(dir + "/controls.jsonl", controls.dump() + "\n");
  const Trajectory traj =
      integrate_controls(EgoState{0, 0, 0, 5.0}, constant_controls(0.5, 0.01));
  write_file(dir + "/traj.jsonl", traj_to_json(traj).dump() + "\n");
  write_file(dir + "/meta.jsonl",
             json{{"trajectory", traj_to_json(traj)}}.dump() + "\n");
  Episode episode;
  episode.id = "e1";
  episode.ego = traj;
  episode.agents.resize(kHorizon);
  episode.drivable = {{-1000.0, -1000.0},
                      {1000.0, -1000.0},
                      {1000.0, 1000.0},
                      {-1000.0, 1000.0}};
  write_file(dir + "/episode.jsonl", episode_to_json(episode).dump() + "\n");
  write_file(dir + "/records.jsonl",
             json{{"decision",
                   {{"longitudinal", "yield"},
                    {"lateral", nullptr},
                    {"side", nullptr}}},
                  {"components",
                   json::array({{{"category", "critical_objects"},
                                 {"attributes",
                                  {{"phrase",
                                    "a pedestrian is crossing ahead"}}},
                                 {"observed_frame", 10}}})},
                  {"keyframe", 25},
                  {"scenario", "yield-to-vru"},
                  {"trace", ""}}
                     .dump() +
                 "\n");
  write_file(dir + "/rollouts.jsonl",
             json{{"trace", "stopping for the crosswalk"},
                  {"gt_trace", "stopping for the crosswalk"},
                  {"trajectory", traj_to_json(traj)},
                  {"expert", traj_to_json(traj)}}
                     .dump() +
                 "\n");
  write_file(dir + "/sft.jsonl", json{{"tokens", {1, 2, 3, 4}}}.dump() + "\n");
  write_file(dir + "/groups.jsonl",
             json{{"rewards", {1.0, 0.0}}, {"logprobs", {-4.0, -0.2}}}.dump() +
                 "\n");
  write_file(dir + "/open.jsonl",
             json{{"gt", traj_to_json(traj)},
                  {"preds", json::array({traj_to_json(traj)})}}
                     .dump() +
                 "\n");
  write_file(dir + "/fast.json",
             R"({"flow":{"hidden":16,"time_embed_dim":8,"iterations":10,
                 "batch_size":8,"delta_t":0.2},
                 "grpo":{"iterations":20,"num_seeds":1,"eval_groups":4}})");

  struct Step {
    std::string name;
    std::string args;               // with OUT placeholder
    std::vector<std::string> outs;  // produced files to compare
    bool capture_stdout = false;
  };
  const std::string cfg = " --config " + dir + "/fast.json --seed 9 ";
  const std::vector<Step> steps = {
      {"integrate", cfg + "--in " + dir + "/controls.jsonl --out OUT",
       {"OUT"}},
      {"fit", cfg + "--in " + dir + "/traj.jsonl --out OUT", {"OUT"}},
      {"tokenize", cfg + "--mode roundtrip --in " + dir +
                       "/controls.jsonl --out OUT",
       {"OUT"}},
      {"detect-meta", cfg + "--in " + dir + "/meta.jsonl --out OUT", {"OUT"}},
      {"keyframes", cfg + "--in PROFILE --out OUT", {"OUT"}},
      {"tag-scenarios", cfg + "--in " + dir + "/episode.jsonl --out OUT",
       {"OUT"}},
      {"compose-coc", cfg + "--in " + dir + "/records.jsonl --out OUT",
       {"OUT"}},
      {"validate-coc", cfg + "--in " + dir + "/records.jsonl --out OUT",
       {"OUT"}},
      {"reward", cfg + "--in " + dir + "/rollouts.jsonl --out OUT", {"OUT"}},
      {"train-fm", cfg + "--in " + dir + "/controls.jsonl --out OUT --ckpt "
                       "CKPT",
       {"OUT", "CKPT.bin", "CKPT.json"}},
      {"sample-fm", cfg + "--ckpt CKPT --n 2 --out OUT", {"OUT"}},
      {"sft-toy", cfg + "--vocab 16 --iters 30 --in " + dir +
                      "/sft.jsonl --out OUT",
       {"OUT"}},
      {"grpo-demo", cfg + "--out OUT", {"OUT"}},
      {"curate", cfg + "--in " + dir + "/groups.jsonl --out OUT", {"OUT"}},
      {"eval-open-loop", cfg + "--in " + dir + "/open.jsonl --out OUT",
       {"OUT"}},
      {"eval-closed-loop", cfg + "--in " + dir + "/episode.jsonl --out OUT",
       {"OUT"}},
      {"token-budget",
       " --mode triplane --sx 96 --sy 96 --sz 48 --p 8 --cameras 7 --out OUT",
       {"OUT"},
       true},
  };

  // keyframes consumes a profile produced by detect-meta.
  shell(bin + " detect-meta" + cfg + "--in " + dir + "/meta.jsonl --out " +
        dir + "/profile.jsonl");

  int exercised = 0;
  for (const Step& step : steps) {
    std::vector<std::string> digests;
    for (int run = 0; run < 2; ++run) {
      const std::string tagdir = dir + "/run" + std::to_string(run);
      shell("mkdir -p " + tagdir);
      std::string args = step.args;
      const std::string out = tagdir + "/" + step.name + ".out";
      // train-fm writes the checkpoint sample-fm reads within the same run.
      const std::string ckpt = tagdir + "/fm.ckpt";
      const std::string profile = dir + "/profile.jsonl";
      for (std::string::size_type pos;
           (pos = args.find("OUT")) != std::string::npos;) {
        args.replace(pos, 3, out);
      }
      for (std::string::size_type pos;
           (pos = args.find("CKPT")) != std::string::npos;) {
        args.replace(pos, 4, ckpt);
      }
      for (std::string::size_type pos;
           (pos = args.find("PROFILE")) != std::string::npos;) {
        args.replace(pos, 7, profile);
      }
      const std::string stdout_file = tagdir + "/" + step.name + ".stdout";
      const int code =
          shell(bin + " " + step.name + args + " > " + stdout_file);
      require(code == 0, step.name + " must exit 0, got " +
                             std::to_string(code));
      std::string digest;
      for (const std::string& out_name : step.outs) {
        std::string path = out_name;
        if (path == "OUT") {
          path = out;
        } else if (path.rfind("CKPT", 0) == 0) {
          path = ckpt + path.substr(4);
        }
        digest += slurp(path);
        digest += '\x01';
      }
      if (step.capture_stdout) digest += slurp(stdout_file);
      digests.push_back(digest);
    }
    require(digests[0] == digests[1],
            step.name + " must produce byte-identical output across runs");
    ++exercised;
  }
  require(exercised == 17, "all 17 subcommands must be exercised");
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<void()> body;
};

}  // namespace

int main() {
  // sample-fm reads the checkpoint train-fm wrote in the same run directory,
  // so step order matters inside criterion 12.
  const std::vector<Criterion> criteria = {
      {1, "dynamics exactness (closed-form constant acceleration)", 1.0,
       criterion_dynamics_exactness},
      {2, "dynamics round-trip over 1000 smooth control sequences", 30.0,
       criterion_dynamics_round_trip},
      {3, "quantizer round-trip and 128-token framing", 5.0,
       criterion_quantizer},
      {4, "flow matching: exact field, fixed target, two-mode recovery",
       120.0, criterion_flow_matching},
      {5, "gradient checks for cfm, sft and grpo losses", 60.0,
       criterion_gradient_checks},
      {6, "grpo arithmetic: zero-sum, uniform limit, shift invariance", 1.0,
       criterion_grpo_arithmetic},
      {7, "grpo improvement on the verifiable-reward token task", 60.0,
       criterion_grpo_improvement},
      {8, "consistency reward fixture suite (12 pairs)", 10.0,
       criterion_consistency_fixtures},
      {9, "compose -> parse closure over the decision grid", 10.0,
       criterion_compose_parse_closure},
      {10, "open- and closed-loop metric fixtures", 10.0, criterion_metrics},
      {11, "vision token budgets (160 / 288 / 41.14)", 1.0,
       criterion_token_budget},
      {12, "CLI determinism across all subcommands", 300.0,
       criterion_cli_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool in_budget = elapsed <= c.budget_s;
    const bool pass = error.empty() && in_budget;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.title
              << "  (" << elapsed << " s";
    if (!in_budget) std::cout << ", budget " << c.budget_s << " s exceeded";
    std::cout << ")\n";
    if (!error.empty()) std::cout << "       " << error << "\n";
    if (!pass) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 12 acceptance criteria passed\n";
  return 0;
}

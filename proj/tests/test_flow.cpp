#include <doctest.h>

#include <cmath>
#include <random>

#include "driveline/errors.hpp"
#include "driveline/flow.hpp"
#include "helpers.hpp"

using namespace driveline;

TEST_CASE("schedule reduces to uniform for alpha = beta = 1, s = 1") {
  ScheduleSpec spec{1.0, 1.0, 1.0};
  std::mt19937_64 rng(13);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_schedule(spec, rng);
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("schedule respects the shift bound") {
  ScheduleSpec spec{2.0, 0.5, 0.999};
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100000; ++i) {
    const double t = sample_schedule(spec, rng);
    CHECK(t >= 0.0);
    CHECK(t <= 0.999);
  }
}

TEST_CASE("schedule mean matches s * alpha / (alpha + beta)") {
  ScheduleSpec spec{1.5, 1.0, 1.0};
  std::mt19937_64 rng(19);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_schedule(spec, rng);
  CHECK(std::abs(sum / n - 0.6) < 0.01);
}

TEST_CASE("degenerate schedule parameters are rejected") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_schedule(ScheduleSpec{0.0, 1.0, 0.5}, rng),
                  ValidationError);
  CHECK_THROWS_AS(sample_schedule(ScheduleSpec{1.0, 1.0, 1.5}, rng),
                  ValidationError);
  CHECK_THROWS_AS(sample_schedule(ScheduleSpec{1.0, 1.0, 0.0}, rng),
                  ValidationError);
}

TEST_CASE("path endpoints are noise at t=0 and data at t=1") {
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(8, -1.0, 2.0);
  Eigen::VectorXd eps = Eigen::VectorXd::Constant(8, 0.37);
  CHECK((make_flow_sample(a, 0.0, eps).a_t - eps).norm() == 0.0);
  CHECK((make_flow_sample(a, 1.0, eps).a_t - a).norm() == 0.0);
}

TEST_CASE("a net emitting exactly a - eps has zero loss") {
  // Zero weights make the output equal the output bias.
  VectorFieldNet net(6, 2, 4, 4);
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  Eigen::VectorXd eps = Eigen::VectorXd::LinSpaced(6, 0.5, -0.5);
  net.output_bias() = a - eps;
  const Eigen::VectorXd cond = Eigen::VectorXd::Zero(2);
  CHECK(cfm_loss_at(net, a, cond, 0.3, eps) == doctest::Approx(0.0));
}

TEST_CASE("zero net on zero data has expected loss equal to the dimension") {
  VectorFieldNet net(kTokensPerTrajectory, 2, 8, 4);  // all-zero params
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(kTokensPerTrajectory);
  const Eigen::VectorXd cond = Eigen::VectorXd::Zero(2);
  std::mt19937_64 rng(23);
  double sum = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    sum += cfm_loss(net, a, cond, ScheduleSpec{}, rng);
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - kTokensPerTrajectory) / kTokensPerTrajectory < 0.05);
}

TEST_CASE("cfm gradients match central finite differences") {
  VectorFieldNet net(6, 2, 5, 4);
  net.init_weights(29);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd a(6), eps(6), cond(2);
  for (int i = 0; i < 6; ++i) a(i) = gauss(rng);
  for (int i = 0; i < 6; ++i) eps(i) = gauss(rng);
  for (int i = 0; i < 2; ++i) cond(i) = gauss(rng);
  const double t = 0.42;

  Eigen::VectorXd grad;
  cfm_loss_at(net, a, cond, t, eps, &grad);
  const double h = 1e-6;
  for (int p = 0; p < net.params().size(); ++p) {
    const double saved = net.params()(p);
    net.params()(p) = saved + h;
    const double up = cfm_loss_at(net, a, cond, t, eps);
    net.params()(p) = saved - h;
    const double down = cfm_loss_at(net, a, cond, t, eps);
    net.params()(p) = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(fd) + std::abs(grad(p)));
    CHECK(std::abs(fd - grad(p)) / denom < 1e-4);
  }
}

TEST_CASE("Euler lands exactly with a constant oracle field") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd target(10), a0(10);
  for (int i = 0; i < 10; ++i) target(i) = gauss(rng);
  for (int i = 0; i < 10; ++i) a0(i) = gauss(rng);
  const Eigen::VectorXd cond = Eigen::VectorXd::Zero(0);
  for (double delta : {0.1, 0.2, 0.25, 0.5, 1.0}) {
    FieldFn field = [&](const Eigen::VectorXd&, const Eigen::VectorXd&,
                        double) { return target - a0; };
    const Eigen::VectorXd result = euler_integrate(field, a0, cond, delta);
    CHECK((result - target).norm() < 1e-9);
  }
}

TEST_CASE("Euler step validation") {
  const Eigen::VectorXd a0 = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd cond = Eigen::VectorXd::Zero(0);
  FieldFn zero_field = [](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                          double) { return Eigen::VectorXd::Zero(a.size()); };
  CHECK_THROWS_AS(euler_integrate(zero_field, a0, cond, 0.3), ValidationError);
  CHECK_THROWS_AS(euler_integrate(zero_field, a0, cond, 0.0), ValidationError);

  FieldFn bad_field = [](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                         double) {
    return Eigen::VectorXd::Constant(a.size(),
                                     std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_WITH_AS(euler_integrate(bad_field, a0, cond, 0.5),
                       doctest::Contains("step 0"), SamplingError);
}

TEST_CASE("training on a fixed target drives the loss down") {
  VectorFieldNet net(kTokensPerTrajectory, 2, 64, 16);
  net.init_weights(41);
  FlowDataset data;
  Eigen::VectorXd target(kTokensPerTrajectory);
  for (int i = 0; i < kTokensPerTrajectory; ++i) {
    target(i) = (i % 2 == 0) ? 1.5 : -0.02;
  }
  data.actions.push_back(target);
  data.conditions.push_back(Eigen::VectorXd::Zero(2));
  FlowTrainOptions opts;
  opts.iterations = 300;
  opts.batch_size = 32;
  opts.seed = 43;
  opts.learning_rate = 3e-3;
  const std::vector<double> losses = train_fm(&net, data, opts);
  auto window_mean = [&](size_t begin, size_t end) {
    double sum = 0.0;
    for (size_t i = begin; i < end; ++i) sum += losses[i];
    return sum / (end - begin);
  };
  CHECK(window_mean(250, 300) < 0.5 * window_mean(0, 50));
}

TEST_CASE("distinct conditions recover their own mode") {
  VectorFieldNet net(kTokensPerTrajectory, 2, 64, 16);
  net.init_weights(47);
  Eigen::VectorXd mode1 = Eigen::VectorXd::Constant(kTokensPerTrajectory, 1.2);
  Eigen::VectorXd mode2 = Eigen::VectorXd::Constant(kTokensPerTrajectory, -1.2);
  Eigen::VectorXd cond1(2), cond2(2);
  cond1 << 1.0, 0.0;
  cond2 << 0.0, 1.0;
  FlowDataset data;
  data.actions = {mode1, mode2};
  data.conditions = {cond1, cond2};
  FlowTrainOptions opts;
  opts.iterations = 400;
  opts.batch_size = 32;
  opts.seed = 53;
  train_fm(&net, data, opts);

  QuantizerSpec wide;
  wide.a_lo = -100.0;
  wide.a_hi = 100.0;
  wide.kappa_lo = -100.0;
  wide.kappa_hi = 100.0;
  std::mt19937_64 rng(59);
  const ControlSequence sample1 = euler_sample(net, cond1, 0.1, rng, wide);
  const Eigen::VectorXd v1 = flatten_controls(sample1);
  CHECK((v1 - mode1).norm() < (v1 - mode2).norm());
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  VectorFieldNet net(kTokensPerTrajectory, 2, 16, 8);
  net.init_weights(61);
  const Eigen::VectorXd cond = Eigen::VectorXd::Zero(2);
  std::mt19937_64 rng_a(77), rng_b(77), rng_c(78);
  const ControlSequence a = euler_sample(net, cond, 0.2, rng_a);
  const ControlSequence b = euler_sample(net, cond, 0.2, rng_b);
  const ControlSequence c = euler_sample(net, cond, 0.2, rng_c);
  bool identical = true, differs = false;
  for (int i = 0; i < kHorizon; ++i) {
    identical &= a.controls[i].a == b.controls[i].a &&
                 a.controls[i].kappa == b.controls[i].kappa;
    differs |= a.controls[i].a != c.controls[i].a;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("checkpoints round-trip through the f32 blob") {
  VectorFieldNet net(kTokensPerTrajectory, 3, 16, 8);
  net.init_weights(67);
  const std::string prefix = "/tmp/driveline_ckpt_test";
  save_checkpoint(net, prefix + ".bin", prefix + ".json");
  const VectorFieldNet loaded = load_checkpoint(prefix + ".bin",
                                                prefix + ".json");
  CHECK(loaded.action_dim() == net.action_dim());
  CHECK(loaded.cond_dim() == 3);
  for (int i = 0; i < net.params().size(); ++i) {
    CHECK(loaded.params()(i) ==
          static_cast<double>(static_cast<float>(net.params()(i))));
  }
}

#include "driveline/flow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "driveline/errors.hpp"
#include "driveline/util.hpp"

namespace driveline {

double sample_schedule(const ScheduleSpec& spec, std::mt19937_64& rng) {
  if (!(spec.alpha > 0.0) || !(spec.beta > 0.0) || !(spec.shift > 0.0) ||
      spec.shift > 1.0) {
    throw ValidationError("sample_schedule", "invalid ScheduleSpec");
  }
  std::gamma_distribution<double> ga(spec.alpha, 1.0);
  std::gamma_distribution<double> gb(spec.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double denom = x + y;
  const double b = denom > 0.0 ? x / denom : 0.5;
  return spec.shift * b;
}

FlowSample make_flow_sample(const Eigen::VectorXd& a, double t,
                            const Eigen::VectorXd& epsilon) {
  if (a.size() != epsilon.size()) {
    throw ValidationError("make_flow_sample", "a and epsilon size mismatch");
  }
  FlowSample s;
  s.t = t;
  s.epsilon = epsilon;
  s.a_t = t * a + (1.0 - t) * epsilon;
  return s;
}

VectorFieldNet::VectorFieldNet(int action_dim, int cond_dim, int hidden,
                               int time_embed_dim)
    : action_dim_(action_dim),
      cond_dim_(cond_dim),
      hidden_(hidden),
      time_embed_dim_(time_embed_dim) {
  if (action_dim < 1 || cond_dim < 0 || hidden < 1 || time_embed_dim < 2 ||
      time_embed_dim % 2 != 0) {
    throw ValidationError("VectorFieldNet", "invalid layer dimensions");
  }
  const int in = input_dim();
  w1_ = 0;
  b1_ = w1_ + hidden_ * in;
  wg_ = b1_ + hidden_;
  w2_ = wg_ + hidden_ * time_embed_dim_;
  b2_ = w2_ + hidden_ * hidden_;
  wg2_ = b2_ + hidden_;
  w3_ = wg2_ + hidden_ * time_embed_dim_;
  b3_ = w3_ + action_dim_ * hidden_;
  ws_ = b3_ + action_dim_;
  bs_ = ws_ + action_dim_ * (action_dim_ + cond_dim_);
  wg3_ = bs_ + action_dim_;
  theta_ = Eigen::VectorXd::Zero(wg3_ + action_dim_ * time_embed_dim_);
}

void VectorFieldNet::init_weights(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int in = input_dim();
  auto fill = [&](int off, int rows, int cols) {
    const double scale = std::sqrt(2.0 / (rows + cols));
    for (int i = 0; i < rows * cols; ++i) theta_(off + i) = scale * gauss(rng);
  };
  fill(w1_, hidden_, in);
  fill(w2_, hidden_, hidden_);
  fill(w3_, action_dim_, hidden_);
  theta_.segment(b1_, hidden_).setZero();
  theta_.segment(b2_, hidden_).setZero();
  theta_.segment(b3_, action_dim_).setZero();
  // The time gates start at identity and the skip path at zero.
  theta_.segment(wg_, hidden_ * time_embed_dim_).setZero();
  theta_.segment(wg2_, hidden_ * time_embed_dim_).setZero();
  theta_.segment(ws_, theta_.size() - ws_).setZero();
}

Eigen::VectorXd VectorFieldNet::time_embedding(double t) const {
  const int half = time_embed_dim_ / 2;
  Eigen::VectorXd e(time_embed_dim_);
  for (int j = 0; j < half; ++j) {
    const double freq =
        half > 1 ? std::exp(std::log(30.0) * j / (half - 1)) : 1.0;
    e(2 * j) = std::sin(freq * t);
    e(2 * j + 1) = std::cos(freq * t);
  }
  return e;
}

namespace {

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using MutMat = Eigen::Map<Eigen::MatrixXd>;

Eigen::MatrixXd silu_sigmoid(const Eigen::MatrixXd& z) {
  return 1.0 / (1.0 + (-z.array()).exp());
}

// d/dz [z * sigmoid(z)] = sigmoid(z) * (1 + z * (1 - sigmoid(z)))
Eigen::MatrixXd silu_derivative(const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd s = silu_sigmoid(z);
  return s.array() * (1.0 + z.array() * (1.0 - s.array()));
}

}  // namespace

void VectorFieldNet::forward_batch(const Eigen::MatrixXd& inputs,
                                   Cache* cache) const {
  const int in = input_dim();
  if (inputs.rows() != in) {
    throw ValidationError("VectorFieldNet::forward",
                          "input dim mismatch: expected " + std::to_string(in) +
                              ", got " + std::to_string(inputs.rows()));
  }
  ConstMat w1(theta_.data() + w1_, hidden_, in);
  ConstMat w2(theta_.data() + w2_, hidden_, hidden_);
  ConstMat w3(theta_.data() + w3_, action_dim_, hidden_);
  const auto b1 = theta_.segment(b1_, hidden_);
  const auto b2 = theta_.segment(b2_, hidden_);
  const auto b3 = theta_.segment(b3_, action_dim_);

  ConstMat wg(theta_.data() + wg_, hidden_, time_embed_dim_);
  ConstMat wg2(theta_.data() + wg2_, hidden_, time_embed_dim_);
  const auto embeds = inputs.bottomRows(time_embed_dim_);
  cache->x = inputs;
  cache->z1 = (w1 * inputs).colwise() + b1;
  cache->s1 = cache->z1.array() * silu_sigmoid(cache->z1).array();
  // FiLM gates: the time embedding scales both hidden layers so the field
  // can vary its gain with t.
  cache->g = (wg * embeds).array() + 1.0;
  cache->h1 = cache->s1.array() * cache->g.array();
  cache->z2 = (w2 * cache->h1).colwise() + b2;
  cache->s2 = cache->z2.array() * silu_sigmoid(cache->z2).array();
  cache->g2 = (wg2 * embeds).array() + 1.0;
  cache->h2 = cache->s2.array() * cache->g2.array();
  // Time-gated linear skip: the target field is close to a t-dependent gain
  // times an affine function of the noisy action, which the skip expresses
  // exactly; the hidden layers fit the residual.
  ConstMat ws(theta_.data() + ws_, action_dim_, action_dim_ + cond_dim_);
  ConstMat wg3(theta_.data() + wg3_, action_dim_, time_embed_dim_);
  const auto bs = theta_.segment(bs_, action_dim_);
  cache->skip = (ws * inputs.topRows(action_dim_ + cond_dim_)).colwise() + bs;
  cache->g3 = (wg3 * embeds).array() + 1.0;
  cache->y = (w3 * cache->h2).colwise() + b3;
  cache->y.array() += cache->skip.array() * cache->g3.array();
}

void VectorFieldNet::backward_batch(const Cache& cache,
                                    const Eigen::MatrixXd& dy,
                                    Eigen::VectorXd* grad) const {
  if (grad->size() != theta_.size()) {
    *grad = Eigen::VectorXd::Zero(theta_.size());
  }
  const int in = input_dim();
  ConstMat w2(theta_.data() + w2_, hidden_, hidden_);
  ConstMat w3(theta_.data() + w3_, action_dim_, hidden_);
  MutMat dw1(grad->data() + w1_, hidden_, in);
  MutMat dwg(grad->data() + wg_, hidden_, time_embed_dim_);
  MutMat dwg2(grad->data() + wg2_, hidden_, time_embed_dim_);
  MutMat dw2(grad->data() + w2_, hidden_, hidden_);
  MutMat dw3(grad->data() + w3_, action_dim_, hidden_);
  const auto embeds = cache.x.bottomRows(time_embed_dim_);

  dw3.noalias() += dy * cache.h2.transpose();
  grad->segment(b3_, action_dim_) += dy.rowwise().sum();

  MutMat dws(grad->data() + ws_, action_dim_, action_dim_ + cond_dim_);
  MutMat dwg3(grad->data() + wg3_, action_dim_, time_embed_dim_);
  const Eigen::MatrixXd dskip = dy.array() * cache.g3.array();
  dws.noalias() +=
      dskip * cache.x.topRows(action_dim_ + cond_dim_).transpose();
  grad->segment(bs_, action_dim_) += dskip.rowwise().sum();
  dwg3.noalias() +=
      (dy.array() * cache.skip.array()).matrix() * embeds.transpose();

  const Eigen::MatrixXd dh2 = w3.transpose() * dy;
  dwg2.noalias() +=
      (dh2.array() * cache.s2.array()).matrix() * embeds.transpose();
  Eigen::MatrixXd dz2 = dh2.array() * cache.g2.array() *
                        silu_derivative(cache.z2).array();
  dw2.noalias() += dz2 * cache.h1.transpose();
  grad->segment(b2_, hidden_) += dz2.rowwise().sum();

  const Eigen::MatrixXd dh1 = w2.transpose() * dz2;
  dwg.noalias() +=
      (dh1.array() * cache.s1.array()).matrix() * embeds.transpose();
  Eigen::MatrixXd dz1 = dh1.array() * cache.g.array() *
                        silu_derivative(cache.z1).array();
  dw1.noalias() += dz1 * cache.x.transpose();
  grad->segment(b1_, hidden_) += dz1.rowwise().sum();
}

Eigen::VectorXd VectorFieldNet::forward(const Eigen::VectorXd& a_t,
                                        const Eigen::VectorXd& cond,
                                        double t) const {
  if (a_t.size() != action_dim_ || cond.size() != cond_dim_) {
    throw ValidationError("VectorFieldNet::forward", "shape mismatch");
  }
  Eigen::MatrixXd input(input_dim(), 1);
  input.col(0) << a_t, cond, time_embedding(t);
  Cache cache;
  forward_batch(input, &cache);
  return cache.y.col(0);
}

double cfm_loss_at(const VectorFieldNet& net, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& cond, double t,
                   const Eigen::VectorXd& epsilon, Eigen::VectorXd* grad) {
  if (a.size() != net.action_dim() || epsilon.size() != net.action_dim()) {
    throw ValidationError("cfm_loss", "action vector shape mismatch");
  }
  const FlowSample s = make_flow_sample(a, t, epsilon);
  Eigen::MatrixXd input(net.input_dim(), 1);
  input.col(0) << s.a_t, cond, net.time_embedding(t);
  VectorFieldNet::Cache cache;
  net.forward_batch(input, &cache);
  const Eigen::VectorXd target = a - epsilon;
  const Eigen::VectorXd residual = cache.y.col(0) - target;
  if (grad != nullptr) {
    grad->setZero();
    Eigen::MatrixXd dy = 2.0 * residual;
    net.backward_batch(cache, dy, grad);
  }
  return residual.squaredNorm();
}

double cfm_loss(const VectorFieldNet& net, const Eigen::VectorXd& a,
                const Eigen::VectorXd& cond, const ScheduleSpec& schedule,
                std::mt19937_64& rng) {
  const double t = sample_schedule(schedule, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd eps(net.action_dim());
  for (int i = 0; i < eps.size(); ++i) eps(i) = gauss(rng);
  return cfm_loss_at(net, a, cond, t, eps, nullptr);
}

Eigen::VectorXd euler_integrate(const FieldFn& field,
                                const Eigen::VectorXd& a0,
                                const Eigen::VectorXd& cond, double delta_t) {
  if (!(delta_t > 0.0) || delta_t > 1.0) {
    throw ValidationError("euler_sample", "delta_t must be in (0, 1]");
  }
  const double steps_real = 1.0 / delta_t;
  const int steps = static_cast<int>(std::lround(steps_real));
  if (steps < 1 || std::abs(steps * delta_t - 1.0) > 1e-9) {
    throw ValidationError("euler_sample",
                          "1/delta_t must be a whole number of steps");
  }
  Eigen::VectorXd a = a0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * delta_t;
    a += delta_t * field(a, cond, t);
    if (!a.allFinite()) {
      throw SamplingError(k, "non-finite state during Euler denoising at "
                             "step " + std::to_string(k));
    }
  }
  return a;
}

ControlSequence controls_from_vector(const Eigen::VectorXd& v, double dt,
                                     const QuantizerSpec& bounds) {
  if (v.size() != kTokensPerTrajectory) {
    throw ValidationError("controls_from_vector",
                          "expected a " + std::to_string(kTokensPerTrajectory) +
                              "-vector");
  }
  ControlSequence out;
  out.dt = dt;
  out.controls.resize(kHorizon);
  for (int i = 0; i < kHorizon; ++i) {
    out.controls[i].a = clamp(v(2 * i), bounds.a_lo, bounds.a_hi);
    out.controls[i].kappa = clamp(v(2 * i + 1), bounds.kappa_lo, bounds.kappa_hi);
  }
  return out;
}

Eigen::VectorXd flatten_controls(const ControlSequence& controls) {
  if (static_cast<int>(controls.controls.size()) != kHorizon) {
    throw ValidationError("flatten_controls", "expected 64 control pairs");
  }
  Eigen::VectorXd v(kTokensPerTrajectory);
  for (int i = 0; i < kHorizon; ++i) {
    v(2 * i) = controls.controls[i].a;
    v(2 * i + 1) = controls.controls[i].kappa;
  }
  return v;
}

ControlSequence euler_sample(const VectorFieldNet& net,
                             const Eigen::VectorXd& cond, double delta_t,
                             std::mt19937_64& rng,
                             const QuantizerSpec& bounds) {
  if (net.action_dim() != kTokensPerTrajectory) {
    throw ValidationError("euler_sample",
                          "net action_dim must equal 128 to decode controls");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd a0(net.action_dim());
  for (int i = 0; i < a0.size(); ++i) a0(i) = gauss(rng);
  FieldFn field = [&net](const Eigen::VectorXd& a_t,
                         const Eigen::VectorXd& c, double t) {
    return net.forward(a_t, c, t);
  };
  const Eigen::VectorXd a1 = euler_integrate(field, a0, cond, delta_t);
  return controls_from_vector(a1, kDt, bounds);
}

namespace {

// Adam with bias correction; state lives alongside the flat parameters.
class Adam {
 public:
  Adam(int n, double lr)
      : lr_(lr), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  void set_lr(double lr) { lr_ = lr; }

  void step(Eigen::VectorXd* theta, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    theta->array() -=
        lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace

std::vector<double> train_fm(VectorFieldNet* net, const FlowDataset& data,
                             const FlowTrainOptions& opts) {
  if (data.actions.empty() || data.actions.size() != data.conditions.size()) {
    throw ValidationError("train_fm", "empty or mismatched dataset");
  }
  for (const auto& a : data.actions) {
    if (a.size() != net->action_dim()) {
      throw ValidationError("train_fm", "action dim mismatch in dataset");
    }
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, data.actions.size() - 1);

  Adam opt(static_cast<int>(net->params().size()), opts.learning_rate);
  Eigen::VectorXd grad(net->params().size());
  const double floor = opts.learning_rate * opts.final_lr_fraction;
  std::vector<double> losses;
  losses.reserve(opts.iterations);

  const int b = opts.batch_size;
  Eigen::MatrixXd inputs(net->input_dim(), b);
  Eigen::MatrixXd targets(net->action_dim(), b);
  for (int iter = 0; iter < opts.iterations; ++iter) {
    for (int j = 0; j < b; ++j) {
      const size_t idx = pick(rng);
      const Eigen::VectorXd& a = data.actions[idx];
      const double t = sample_schedule(opts.schedule, rng);
      Eigen::VectorXd eps(net->action_dim());
      for (int i = 0; i < eps.size(); ++i) eps(i) = gauss(rng);
      inputs.col(j) << t * a + (1.0 - t) * eps, data.conditions[idx],
          net->time_embedding(t);
      targets.col(j) = a - eps;
    }
    VectorFieldNet::Cache cache;
    net->forward_batch(inputs, &cache);
    const Eigen::MatrixXd residual = cache.y - targets;
    losses.push_back(residual.squaredNorm() / b);
    grad.setZero();
    Eigen::MatrixXd dy = (2.0 / b) * residual;
    net->backward_batch(cache, dy, &grad);
    const double progress = static_cast<double>(iter) / opts.iterations;
    opt.set_lr(floor + 0.5 * (opts.learning_rate - floor) *
                           (1.0 + std::cos(kPi * progress)));
    opt.step(&net->params(), grad);
  }
  return losses;
}

void save_checkpoint(const VectorFieldNet& net, const std::string& bin_path,
                     const std::string& json_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) {
    throw ValidationError("save_checkpoint", "cannot open " + bin_path);
  }
  for (int i = 0; i < net.params().size(); ++i) {
    const float f = static_cast<float>(net.params()(i));
    bin.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
  nlohmann::json side = {
      {"v", 1},
      {"dtype", "f32le"},
      {"action_dim", net.action_dim()},
      {"cond_dim", net.cond_dim()},
      {"hidden", net.hidden()},
      {"time_embed_dim", net.time_embed_dim()},
      {"param_count", net.params().size()},
      {"tensors",
       {{{"name", "w1"}, {"rows", net.hidden()}, {"cols", net.input_dim()}},
        {{"name", "b1"}, {"rows", net.hidden()}, {"cols", 1}},
        {{"name", "w2"}, {"rows", net.hidden()}, {"cols", net.hidden()}},
        {{"name", "b2"}, {"rows", net.hidden()}, {"cols", 1}},
        {{"name", "w3"}, {"rows", net.action_dim()}, {"cols", net.hidden()}},
        {{"name", "b3"}, {"rows", net.action_dim()}, {"cols", 1}}}}};
  std::ofstream js(json_path);
  if (!js) {
    throw ValidationError("save_checkpoint", "cannot open " + json_path);
  }
  js << side.dump(2) << "\n";
}

VectorFieldNet load_checkpoint(const std::string& bin_path,
                               const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) {
    throw ValidationError("load_checkpoint", "cannot open " + json_path);
  }
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("load_checkpoint", std::string("bad sidecar: ") +
                                                  e.what());
  }
  VectorFieldNet net(side.at("action_dim").get<int>(),
                     side.at("cond_dim").get<int>(),
                     side.at("hidden").get<int>(),
                     side.at("time_embed_dim").get<int>());
  const auto count = side.at("param_count").get<long>();
  if (count != net.params().size()) {
    throw ValidationError("load_checkpoint", "param_count mismatch");
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) {
    throw ValidationError("load_checkpoint", "cannot open " + bin_path);
  }
  for (long i = 0; i < count; ++i) {
    float f = 0.0f;
    bin.read(reinterpret_cast<char*>(&f), sizeof(float));
    if (!bin) {
      throw ValidationError("load_checkpoint", "truncated weight blob");
    }
    net.params()(i) = static_cast<double>(f);
  }
  return net;
}

}  // namespace driveline

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "driveline/codec.hpp"
#include "driveline/traj.hpp"

namespace driveline {

// Training-time distribution for the flow time variable: Beta(alpha, beta)
// scaled into [0, shift].
struct ScheduleSpec {
  double alpha = 1.5;
  double beta = 1.0;
  double shift = 0.999;
};

double sample_schedule(const ScheduleSpec& spec, std::mt19937_64& rng);

// One point on the linear noise-to-data path a_t = t*a + (1-t)*eps.
struct FlowSample {
  Eigen::VectorXd a_t;
  double t = 0.0;
  Eigen::VectorXd epsilon;
};

FlowSample make_flow_sample(const Eigen::VectorXd& a, double t,
                            const Eigen::VectorXd& epsilon);

// Fully connected vector-field regressor: input is the noisy action vector,
// the conditioning context, and a sinusoidal embedding of t; two SiLU hidden
// layers of the same width with the time embedding gating the first layer
// (the field's gain varies strongly with t); linear output of action_dim.
//
// Parameters live in one flat vector so the optimizer, the checkpoint format
// and finite-difference checks all address them uniformly.
class VectorFieldNet {
 public:
  VectorFieldNet(int action_dim = kTokensPerTrajectory, int cond_dim = 2,
                 int hidden = 256, int time_embed_dim = 32);

  void init_weights(uint64_t seed);

  int action_dim() const { return action_dim_; }
  int cond_dim() const { return cond_dim_; }
  int hidden() const { return hidden_; }
  int time_embed_dim() const { return time_embed_dim_; }
  int input_dim() const { return action_dim_ + cond_dim_ + time_embed_dim_; }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }

  // Output bias segment; with all other weights zero the net emits exactly
  // this vector.
  Eigen::VectorBlock<Eigen::VectorXd> output_bias() {
    return theta_.segment(b3_, action_dim_);
  }

  Eigen::VectorXd time_embedding(double t) const;

  // v_theta(a_t, cond, t).
  Eigen::VectorXd forward(const Eigen::VectorXd& a_t,
                          const Eigen::VectorXd& cond, double t) const;

  // Batched forward over columns; exposed for the trainer.
  struct Cache {
    Eigen::MatrixXd x, z1, s1, g, h1, z2, s2, g2, h2, skip, g3, y;
  };
  void forward_batch(const Eigen::MatrixXd& inputs, Cache* cache) const;
  // Accumulates dL/dtheta into grad given dL/dy; grad must be zero-sized or
  // match params().
  void backward_batch(const Cache& cache, const Eigen::MatrixXd& dy,
                      Eigen::VectorXd* grad) const;

 private:
  int action_dim_, cond_dim_, hidden_, time_embed_dim_;
  Eigen::VectorXd theta_;
  // Flat layout offsets.
  int w1_, b1_, wg_, w2_, b2_, wg2_, w3_, b3_, ws_, bs_, wg3_;
};

// Conditional flow-matching loss for one sample: draws t from the schedule
// and eps ~ N(0, I), forms a_t on the OT path and regresses onto the
// closed-form target a - eps. Returns |v(a_t) - (a - eps)|^2.
double cfm_loss(const VectorFieldNet& net, const Eigen::VectorXd& a,
                const Eigen::VectorXd& cond, const ScheduleSpec& schedule,
                std::mt19937_64& rng);

// Deterministic core with (t, eps) pinned; grad, when non-null, receives
// dLoss/dparams (overwritten).
double cfm_loss_at(const VectorFieldNet& net, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& cond, double t,
                   const Eigen::VectorXd& epsilon,
                   Eigen::VectorXd* grad = nullptr);

using FieldFn = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& a_t, const Eigen::VectorXd& cond, double t)>;

// Euler integration of an arbitrary field from a given start; throws
// SamplingError naming the step on non-finite output. 1/delta_t must be a
// whole number of steps.
Eigen::VectorXd euler_integrate(const FieldFn& field,
                                const Eigen::VectorXd& a0,
                                const Eigen::VectorXd& cond, double delta_t);

// Denoises from a_0 ~ N(0, I) through the learned field and reshapes the
// result into a ControlSequence clamped to the codec ranges.
ControlSequence euler_sample(const VectorFieldNet& net,
                             const Eigen::VectorXd& cond, double delta_t,
                             std::mt19937_64& rng,
                             const QuantizerSpec& bounds = {});

Eigen::VectorXd flatten_controls(const ControlSequence& controls);
ControlSequence controls_from_vector(const Eigen::VectorXd& v, double dt,
                                     const QuantizerSpec& bounds);

struct FlowTrainOptions {
  int iterations = 400;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double final_lr_fraction = 0.1;  // cosine decay floor
  uint64_t seed = 0;
  ScheduleSpec schedule;
};

struct FlowDataset {
  std::vector<Eigen::VectorXd> actions;     // each action_dim
  std::vector<Eigen::VectorXd> conditions;  // each cond_dim
};

// Adam-style trainer; returns the per-iteration batch losses.
std::vector<double> train_fm(VectorFieldNet* net, const FlowDataset& data,
                             const FlowTrainOptions& opts);

// Little-endian float32 blob plus a JSON sidecar describing shapes.
void save_checkpoint(const VectorFieldNet& net, const std::string& bin_path,
                     const std::string& json_path);
VectorFieldNet load_checkpoint(const std::string& bin_path,
                               const std::string& json_path);

}  // namespace driveline

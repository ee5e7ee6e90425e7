#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "driveline/rewards.hpp"
#include "driveline/toy_policy.hpp"

namespace driveline {

struct GrpoRollout {
  std::vector<int> tokens;
  double logprob_theta = 0.0;
  double logprob_ref = 0.0;
  double reward = 0.0;
  RewardBreakdown breakdown;  // optional bookkeeping
};

struct RolloutGroup {
  std::vector<GrpoRollout> rollouts;  // K >= 2
  double beta = 1.0;                  // weighting sharpness
  double lambda_kl = 0.0;
};

void validate(const RolloutGroup& group, const char* context);

// A_i = r_i - mean(r); sums to zero.
std::vector<double> advantages(const RolloutGroup& group);

// Max-shifted softmax of beta * A; nonnegative, sums to 1. beta = 0 gives
// the uniform 1/K.
std::vector<double> group_weights(const std::vector<double>& advantages,
                                  double beta);

// -sum_i w_i * (log pi_theta(tau_i) - lambda_kl * KL_i), where KL_i is the
// per-sequence sum of exact per-step categorical KL(pi_theta || pi_ref) and
// the weights are sampling-time constants. grad, when non-null, receives
// dLoss/dtheta (overwritten).
double grpo_loss(const ToyPolicy& policy, const ToyPolicy& ref,
                 const RolloutGroup& group, const Eigen::VectorXd& ctx,
                 Eigen::VectorXd* grad = nullptr);

// Mean per-token negative log-likelihood over the batch.
double sft_loss(const ToyPolicy& policy,
                const std::vector<std::vector<int>>& sequences,
                const Eigen::VectorXd& ctx, Eigen::VectorXd* grad = nullptr);

// Disagreement between the reward-implied Boltzmann distribution over the
// group and the model's own (renormalized) sequence probabilities:
// KL(softmax(beta * r) || softmax(logprob_theta)). The curation beta is a
// separate knob from the objective beta.
double disagreement_score(const RolloutGroup& group, double curation_beta);

// (group index, score) ranked by descending disagreement.
std::vector<std::pair<size_t, double>> curation_scores(
    const std::vector<RolloutGroup>& groups, double curation_beta);

// Top-fraction disagreement indices plus an equal number of uniformly drawn
// remaining indices.
std::vector<size_t> curation_select(const std::vector<RolloutGroup>& groups,
                                    double top_fraction, double curation_beta,
                                    std::mt19937_64& rng);

// Verifiable-reward token task: reward 1 iff the rollout starts with the
// hidden target prefix. An SFT-initialized policy is post-trained with the
// group objective; the report tracks the mean group reward per iteration.
struct GrpoDemoOptions {
  int vocab = 16;
  int seq_len = 6;
  int prefix_len = 4;
  int group_size = 6;
  int iterations = 200;
  double beta = 1.0;
  double lambda_kl = 0.005;
  double learning_rate = 0.05;
  int sft_corpus_size = 64;
  double sft_target_fraction = 0.3;
  int sft_iterations = 150;
  double sft_learning_rate = 0.05;
  int eval_groups = 32;
  uint64_t seed = 0;
  int num_seeds = 5;
};

struct GrpoDemoReport {
  int iterations = 0;
  std::vector<double> mean_reward_curve;  // seed-averaged, per iteration
  double initial_reward = 0.0;            // SFT policy, seed-averaged
  double final_reward = 0.0;              // post-trained, seed-averaged
  double final_consistency_rate = 0.0;    // target-match rate at the end
};

GrpoDemoReport run_grpo_demo(const GrpoDemoOptions& opts);

}  // namespace driveline

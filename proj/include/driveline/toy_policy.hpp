#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace driveline {

// Desk-scale autoregressive next-token model over a categorical vocabulary
// with a fixed context vector:
//   h_t = tanh(Emb[prev] + Pos[t] + Wc * ctx + bh),  logits_t = Wo * h_t + bo.
// Parameters are flat in the order [Emb, Pos, Wc, bh, Wo, bo]; Emb has
// vocab + 1 rows, the last being the begin-of-sequence embedding.
class ToyPolicy {
 public:
  ToyPolicy(int vocab, int seq_len, int ctx_dim = 2, int hidden = 32);

  void init_weights(uint64_t seed, double scale = 0.1);

  int vocab() const { return vocab_; }
  int seq_len() const { return seq_len_; }
  int ctx_dim() const { return ctx_dim_; }
  int hidden() const { return hidden_; }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }

  // Next-token distribution; prev_token == vocab() means begin-of-sequence.
  Eigen::VectorXd step_probs(int prev_token, int t,
                             const Eigen::VectorXd& ctx) const;

  double sequence_logprob(const std::vector<int>& tokens,
                          const Eigen::VectorXd& ctx) const;

  std::vector<int> sample(const Eigen::VectorXd& ctx,
                          std::mt19937_64& rng) const;

  // Accumulates parameter gradients for a per-step dL/dlogits contribution.
  void accumulate_step_grad(int prev_token, int t, const Eigen::VectorXd& ctx,
                            const Eigen::VectorXd& dlogits,
                            Eigen::VectorXd* grad) const;

 private:
  struct StepCache {
    Eigen::VectorXd h;
    Eigen::VectorXd probs;
  };
  StepCache step(int prev_token, int t, const Eigen::VectorXd& ctx) const;

  int vocab_, seq_len_, ctx_dim_, hidden_;
  Eigen::VectorXd theta_;
  int emb_, pos_, wc_, bh_, wo_, bo_;
};

}  // namespace driveline

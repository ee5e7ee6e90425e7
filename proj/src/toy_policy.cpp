#include "driveline/toy_policy.hpp"

#include <cmath>

#include "driveline/errors.hpp"

namespace driveline {

ToyPolicy::ToyPolicy(int vocab, int seq_len, int ctx_dim, int hidden)
    : vocab_(vocab), seq_len_(seq_len), ctx_dim_(ctx_dim), hidden_(hidden) {
  if (vocab < 2 || seq_len < 1 || ctx_dim < 0 || hidden < 1) {
    throw ValidationError("ToyPolicy", "invalid dimensions");
  }
  emb_ = 0;
  pos_ = emb_ + (vocab_ + 1) * hidden_;
  wc_ = pos_ + seq_len_ * hidden_;
  bh_ = wc_ + hidden_ * ctx_dim_;
  wo_ = bh_ + hidden_;
  bo_ = wo_ + vocab_ * hidden_;
  theta_ = Eigen::VectorXd::Zero(bo_ + vocab_);
}

void ToyPolicy::init_weights(uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  for (int i = 0; i < theta_.size(); ++i) theta_(i) = gauss(rng);
}

ToyPolicy::StepCache ToyPolicy::step(int prev_token, int t,
                                     const Eigen::VectorXd& ctx) const {
  if (prev_token < 0 || prev_token > vocab_) {
    throw ValidationError("ToyPolicy", "previous token out of vocabulary");
  }
  if (t < 0 || t >= seq_len_) {
    throw ValidationError("ToyPolicy", "step index out of range");
  }
  if (ctx.size() != ctx_dim_) {
    throw ValidationError("ToyPolicy", "context dim mismatch");
  }
  using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
  ConstMat emb(theta_.data() + emb_, hidden_, vocab_ + 1);
  ConstMat pos(theta_.data() + pos_, hidden_, seq_len_);
  ConstMat wc(theta_.data() + wc_, hidden_, ctx_dim_);
  ConstMat wo(theta_.data() + wo_, vocab_, hidden_);

  StepCache cache;
  Eigen::VectorXd pre =
      emb.col(prev_token) + pos.col(t) + theta_.segment(bh_, hidden_);
  if (ctx_dim_ > 0) pre += wc * ctx;
  cache.h = pre.array().tanh();
  Eigen::VectorXd logits = wo * cache.h + theta_.segment(bo_, vocab_);
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  cache.probs = e / e.sum();
  return cache;
}

Eigen::VectorXd ToyPolicy::step_probs(int prev_token, int t,
                                      const Eigen::VectorXd& ctx) const {
  return step(prev_token, t, ctx).probs;
}

double ToyPolicy::sequence_logprob(const std::vector<int>& tokens,
                                   const Eigen::VectorXd& ctx) const {
  if (static_cast<int>(tokens.size()) != seq_len_) {
    throw ValidationError("ToyPolicy", "sequence length mismatch");
  }
  double logprob = 0.0;
  int prev = vocab_;  // begin-of-sequence
  for (int t = 0; t < seq_len_; ++t) {
    const int tok = tokens[t];
    if (tok < 0 || tok >= vocab_) {
      throw ValidationError("ToyPolicy", "token out of vocabulary at step " +
                                             std::to_string(t));
    }
    logprob += std::log(step(prev, t, ctx).probs(tok));
    prev = tok;
  }
  return logprob;
}

std::vector<int> ToyPolicy::sample(const Eigen::VectorXd& ctx,
                                   std::mt19937_64& rng) const {
  std::vector<int> tokens(seq_len_);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int prev = vocab_;
  for (int t = 0; t < seq_len_; ++t) {
    const Eigen::VectorXd probs = step(prev, t, ctx).probs;
    const double u = unif(rng);
    double acc = 0.0;
    int tok = vocab_ - 1;
    for (int v = 0; v < vocab_; ++v) {
      acc += probs(v);
      if (u < acc) {
        tok = v;
        break;
      }
    }
    tokens[t] = tok;
    prev = tok;
  }
  return tokens;
}

void ToyPolicy::accumulate_step_grad(int prev_token, int t,
                                     const Eigen::VectorXd& ctx,
                                     const Eigen::VectorXd& dlogits,
                                     Eigen::VectorXd* grad) const {
  if (grad->size() != theta_.size()) {
    *grad = Eigen::VectorXd::Zero(theta_.size());
  }
  const StepCache cache = step(prev_token, t, ctx);
  using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
  using MutMat = Eigen::Map<Eigen::MatrixXd>;
  ConstMat wo(theta_.data() + wo_, vocab_, hidden_);
  MutMat demb(grad->data() + emb_, hidden_, vocab_ + 1);
  MutMat dpos(grad->data() + pos_, hidden_, seq_len_);
  MutMat dwc(grad->data() + wc_, hidden_, ctx_dim_);
  MutMat dwo(grad->data() + wo_, vocab_, hidden_);

  dwo.noalias() += dlogits * cache.h.transpose();
  grad->segment(bo_, vocab_) += dlogits;
  Eigen::VectorXd dh = wo.transpose() * dlogits;
  Eigen::VectorXd dpre = dh.array() * (1.0 - cache.h.array().square());
  demb.col(prev_token) += dpre;
  dpos.col(t) += dpre;
  if (ctx_dim_ > 0) dwc.noalias() += dpre * ctx.transpose();
  grad->segment(bh_, hidden_) += dpre;
}

}  // namespace driveline

#include "driveline/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "driveline/errors.hpp"

namespace driveline {

void validate(const RolloutGroup& group, const char* context) {
  if (group.rollouts.size() < 2) {
    throw ValidationError(context, "a rollout group needs K >= 2");
  }
  for (const GrpoRollout& r : group.rollouts) {
    if (!std::isfinite(r.reward) || !std::isfinite(r.logprob_theta) ||
        !std::isfinite(r.logprob_ref)) {
      throw ValidationError(context, "non-finite rollout statistics");
    }
  }
}

std::vector<double> advantages(const RolloutGroup& group) {
  validate(group, "advantages");
  double mean = 0.0;
  for (const GrpoRollout& r : group.rollouts) mean += r.reward;
  mean /= static_cast<double>(group.rollouts.size());
  std::vector<double> out;
  out.reserve(group.rollouts.size());
  for (const GrpoRollout& r : group.rollouts) out.push_back(r.reward - mean);
  return out;
}

std::vector<double> group_weights(const std::vector<double>& advantages,
                                  double beta) {
  if (advantages.empty()) {
    throw ValidationError("group_weights", "empty advantage list");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double a : advantages) {
    if (!std::isfinite(a)) {
      throw ValidationError("group_weights", "non-finite advantage");
    }
    m = std::max(m, beta * a);
  }
  std::vector<double> w(advantages.size());
  double sum = 0.0;
  for (size_t i = 0; i < advantages.size(); ++i) {
    w[i] = std::exp(beta * advantages[i] - m);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

namespace {

// Exact KL(p || q) and its gradient w.r.t. p's logits:
// dKL/dz_u = p_u * (log(p_u / q_u) - KL).
double step_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
               Eigen::VectorXd* dlogits) {
  double kl = 0.0;
  Eigen::VectorXd log_ratio(p.size());
  for (int v = 0; v < p.size(); ++v) {
    log_ratio(v) = std::log(p(v)) - std::log(q(v));
    kl += p(v) * log_ratio(v);
  }
  if (dlogits != nullptr) {
    *dlogits = p.array() * (log_ratio.array() - kl);
  }
  return kl;
}

}  // namespace

double grpo_loss(const ToyPolicy& policy, const ToyPolicy& ref,
                 const RolloutGroup& group, const Eigen::VectorXd& ctx,
                 Eigen::VectorXd* grad) {
  validate(group, "grpo_loss");
  if (policy.vocab() != ref.vocab() || policy.seq_len() != ref.seq_len()) {
    throw ValidationError("grpo_loss", "policy and reference differ in shape");
  }
  const std::vector<double> w = group_weights(advantages(group), group.beta);

  if (grad != nullptr && grad->size() != policy.params().size()) {
    *grad = Eigen::VectorXd::Zero(policy.params().size());
  }
  if (grad != nullptr) grad->setZero();

  double loss = 0.0;
  for (size_t i = 0; i < group.rollouts.size(); ++i) {
    const std::vector<int>& tokens = group.rollouts[i].tokens;
    if (static_cast<int>(tokens.size()) != policy.seq_len()) {
      throw ValidationError("grpo_loss", "rollout length mismatch");
    }
    double logprob = 0.0;
    double kl = 0.0;
    int prev = policy.vocab();
    for (int t = 0; t < policy.seq_len(); ++t) {
      const int tok = tokens[t];
      if (tok < 0 || tok >= policy.vocab()) {
        throw ValidationError("grpo_loss", "token out of vocabulary");
      }
      const Eigen::VectorXd p = policy.step_probs(prev, t, ctx);
      const Eigen::VectorXd q = ref.step_probs(prev, t, ctx);
      logprob += std::log(p(tok));
      Eigen::VectorXd dkl;
      kl += step_kl(p, q, grad != nullptr ? &dkl : nullptr);
      if (grad != nullptr) {
        // d(-w_i (log p(tok) - lambda KL)) / dlogits
        Eigen::VectorXd dlogits = p;
        dlogits(tok) -= 1.0;  // -(onehot - p)
        dlogits *= w[i];
        dlogits += w[i] * group.lambda_kl * dkl;
        policy.accumulate_step_grad(prev, t, ctx, dlogits, grad);
      }
      prev = tok;
    }
    loss -= w[i] * (logprob - group.lambda_kl * kl);
  }
  return loss;
}

double sft_loss(const ToyPolicy& policy,
                const std::vector<std::vector<int>>& sequences,
                const Eigen::VectorXd& ctx, Eigen::VectorXd* grad) {
  if (sequences.empty()) {
    throw ValidationError("sft_loss", "empty batch");
  }
  if (grad != nullptr) {
    if (grad->size() != policy.params().size()) {
      *grad = Eigen::VectorXd::Zero(policy.params().size());
    }
    grad->setZero();
  }
  const double scale =
      1.0 / (static_cast<double>(sequences.size()) * policy.seq_len());
  double loss = 0.0;
  for (const std::vector<int>& tokens : sequences) {
    if (static_cast<int>(tokens.size()) != policy.seq_len()) {
      throw ValidationError("sft_loss", "sequence length mismatch");
    }
    int prev = policy.vocab();
    for (int t = 0; t < policy.seq_len(); ++t) {
      const int tok = tokens[t];
      if (tok < 0 || tok >= policy.vocab()) {
        throw ValidationError("sft_loss", "token out of vocabulary at step " +
                                              std::to_string(t));
      }
      const Eigen::VectorXd p = policy.step_probs(prev, t, ctx);
      loss -= scale * std::log(p(tok));
      if (grad != nullptr) {
        Eigen::VectorXd dlogits = p;
        dlogits(tok) -= 1.0;
        dlogits *= scale;
        policy.accumulate_step_grad(prev, t, ctx, dlogits, grad);
      }
      prev = tok;
    }
  }
  return loss;
}

namespace {

std::vector<double> softmax_of(const std::vector<double>& values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace

double disagreement_score(const RolloutGroup& group, double curation_beta) {
  validate(group, "disagreement_score");
  std::vector<double> scaled_rewards, logprobs;
  for (const GrpoRollout& r : group.rollouts) {
    scaled_rewards.push_back(curation_beta * r.reward);
    logprobs.push_back(r.logprob_theta);
  }
  const std::vector<double> p_reward = softmax_of(scaled_rewards);
  const std::vector<double> p_model = softmax_of(logprobs);
  double kl = 0.0;
  for (size_t i = 0; i < p_reward.size(); ++i) {
    if (p_reward[i] > 0.0) {
      kl += p_reward[i] * (std::log(p_reward[i]) - std::log(p_model[i]));
    }
  }
  return kl;
}

std::vector<std::pair<size_t, double>> curation_scores(
    const std::vector<RolloutGroup>& groups, double curation_beta) {
  std::vector<std::pair<size_t, double>> out;
  out.reserve(groups.size());
  for (size_t i = 0; i < groups.size(); ++i) {
    out.emplace_back(i, disagreement_score(groups[i], curation_beta));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  return out;
}

std::vector<size_t> curation_select(const std::vector<RolloutGroup>& groups,
                                    double top_fraction, double curation_beta,
                                    std::mt19937_64& rng) {
  if (top_fraction < 0.0 || top_fraction > 0.5) {
    throw ValidationError("curation_select", "top_fraction must be in [0, 0.5]");
  }
  const auto ranked = curation_scores(groups, curation_beta);
  const size_t n_top = static_cast<size_t>(
      std::lround(top_fraction * static_cast<double>(groups.size())));
  std::vector<size_t> selected;
  for (size_t i = 0; i < n_top && i < ranked.size(); ++i) {
    selected.push_back(ranked[i].first);
  }
  // Equal share of random remainder keeps the pool diverse.
  std::vector<size_t> rest;
  for (size_t i = n_top; i < ranked.size(); ++i) rest.push_back(ranked[i].first);
  for (size_t k = 0; k < n_top && !rest.empty(); ++k) {
    std::uniform_int_distribution<size_t> pick(0, rest.size() - 1);
    const size_t j = pick(rng);
    selected.push_back(rest[j]);
    rest.erase(rest.begin() + static_cast<long>(j));
  }
  return selected;
}

namespace {

class AdamFlat {
 public:
  AdamFlat(int n, double lr)
      : lr_(lr), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd* theta, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = 0.9 * m_ + 0.1 * grad;
    v_ = 0.999 * v_.array() + 0.001 * grad.array().square();
    const double c1 = 1.0 - std::pow(0.9, t_);
    const double c2 = 1.0 - std::pow(0.999, t_);
    theta->array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + 1e-8);
  }

 private:
  double lr_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

std::vector<int> demo_target(int vocab, int seq_len) {
  // Fixed, arbitrary pattern inside the vocabulary.
  std::vector<int> target(seq_len);
  const int base[] = {3, 1, 4, 1, 5, 9, 2, 6};
  for (int t = 0; t < seq_len; ++t) target[t] = base[t % 8] % vocab;
  return target;
}

double prefix_reward(const std::vector<int>& tokens,
                     const std::vector<int>& target, int prefix_len) {
  for (int t = 0; t < prefix_len; ++t) {
    if (tokens[t] != target[t]) return 0.0;
  }
  return 1.0;
}

double eval_mean_reward(const ToyPolicy& policy, const Eigen::VectorXd& ctx,
                        const std::vector<int>& target, int prefix_len,
                        int groups, int group_size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  double total = 0.0;
  int count = 0;
  for (int g = 0; g < groups; ++g) {
    for (int k = 0; k < group_size; ++k) {
      total += prefix_reward(policy.sample(ctx, rng), target, prefix_len);
      ++count;
    }
  }
  return total / count;
}

}  // namespace

GrpoDemoReport run_grpo_demo(const GrpoDemoOptions& opts) {
  if (opts.prefix_len > opts.seq_len || opts.num_seeds < 1) {
    throw ValidationError("grpo_demo", "invalid options");
  }
  const std::vector<int> target = demo_target(opts.vocab, opts.seq_len);
  const Eigen::VectorXd ctx = Eigen::VectorXd::Zero(2);

  GrpoDemoReport report;
  report.iterations = opts.iterations;
  report.mean_reward_curve.assign(opts.iterations, 0.0);

  for (int s = 0; s < opts.num_seeds; ++s) {
    const uint64_t seed = opts.seed + 1000ull * s;
    std::mt19937_64 rng(seed);

    // SFT corpus: a target-prefixed share plus random sequences.
    std::vector<std::vector<int>> corpus;
    std::uniform_int_distribution<int> tok(0, opts.vocab - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < opts.sft_corpus_size; ++i) {
      std::vector<int> seq(opts.seq_len);
      const bool from_target = unif(rng) < opts.sft_target_fraction;
      for (int t = 0; t < opts.seq_len; ++t) {
        seq[t] = (from_target && t < opts.prefix_len) ? target[t] : tok(rng);
      }
      corpus.push_back(std::move(seq));
    }

    ToyPolicy policy(opts.vocab, opts.seq_len);
    policy.init_weights(seed, 0.05);
    {
      AdamFlat opt(static_cast<int>(policy.params().size()),
                   opts.sft_learning_rate);
      Eigen::VectorXd grad(policy.params().size());
      for (int it = 0; it < opts.sft_iterations; ++it) {
        sft_loss(policy, corpus, ctx, &grad);
        opt.step(&policy.params(), grad);
      }
    }
    const ToyPolicy ref = policy;

    report.initial_reward +=
        eval_mean_reward(policy, ctx, target, opts.prefix_len,
                         opts.eval_groups, opts.group_size, seed + 17);

    AdamFlat opt(static_cast<int>(policy.params().size()), opts.learning_rate);
    Eigen::VectorXd grad(policy.params().size());
    for (int it = 0; it < opts.iterations; ++it) {
      RolloutGroup group;
      group.beta = opts.beta;
      group.lambda_kl = opts.lambda_kl;
      double group_reward = 0.0;
      for (int k = 0; k < opts.group_size; ++k) {
        GrpoRollout rollout;
        rollout.tokens = policy.sample(ctx, rng);
        rollout.reward = prefix_reward(rollout.tokens, target, opts.prefix_len);
        rollout.logprob_theta = policy.sequence_logprob(rollout.tokens, ctx);
        rollout.logprob_ref = ref.sequence_logprob(rollout.tokens, ctx);
        group_reward += rollout.reward;
        group.rollouts.push_back(std::move(rollout));
      }
      report.mean_reward_curve[it] += group_reward / opts.group_size;
      grpo_loss(policy, ref, group, ctx, &grad);
      opt.step(&policy.params(), grad);
    }

    report.final_reward +=
        eval_mean_reward(policy, ctx, target, opts.prefix_len,
                         opts.eval_groups, opts.group_size, seed + 31);
  }

  const double inv = 1.0 / opts.num_seeds;
  report.initial_reward *= inv;
  report.final_reward *= inv;
  for (double& r : report.mean_reward_curve) r *= inv;
  report.final_consistency_rate = report.final_reward;
  return report;
}

}  // namespace driveline

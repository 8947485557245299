#include "safe/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safe {

void SyntheticRewardModel::validate() const {
  if (target_distribution.size() == 0) throw std::invalid_argument("reward model: empty target distribution");
  if ((target_distribution.array() < 0.0).any() || std::abs(target_distribution.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("reward model: target distribution must be a probability vector");
  }
  if (artifact_bonus < 0.0 || noise_std < 0.0) {
    throw std::invalid_argument("reward model: bonus and noise must be nonnegative");
  }
  if (artifact_token && (*artifact_token < 0 || *artifact_token >= target_distribution.size())) {
    throw std::invalid_argument("reward model: artifact token out of range");
  }
}

double base_reward(const SyntheticRewardModel& model, std::span<const int> tokens) {
  if (tokens.empty()) throw std::invalid_argument("score: empty completion");
  const Eigen::Index v = model.target_distribution.size();
  Eigen::VectorXd empirical = Eigen::VectorXd::Zero(v);
  for (int t : tokens) {
    if (t < 0 || t >= v) throw std::invalid_argument("score: token out of range");
    empirical(t) += 1.0;
  }
  empirical /= static_cast<double>(tokens.size());
  return 1.0 - 0.5 * (empirical - model.target_distribution).cwiseAbs().sum();
}

double score(const SyntheticRewardModel& model, std::span<const int> tokens, std::mt19937_64& rng) {
  double r = base_reward(model, tokens);
  if (model.artifact_token) {
    const auto hits = std::count(tokens.begin(), tokens.end(), *model.artifact_token);
    r += model.artifact_bonus * static_cast<double>(hits) / static_cast<double>(tokens.size());
  }
  if (model.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, model.noise_std);
    r += noise(rng);
  }
  return std::clamp(r, 0.0, 1.0 + model.artifact_bonus);
}

void EnvironmentConfig::validate() const {
  if (vocab_size < 2 || feature_dim < 1 || num_contexts < 1) {
    throw std::invalid_argument("environment: vocab_size >= 2, feature_dim >= 1, num_contexts >= 1 required");
  }
  if (target_support < 1 || target_support > vocab_size) {
    throw std::invalid_argument("environment: target_support must lie in [1, vocab_size]");
  }
  if (!(target_decay > 0.0)) throw std::invalid_argument("environment: target_decay must be positive");
  if (artifact_token >= vocab_size) throw std::invalid_argument("environment: artifact_token out of range");
  if (artifact_bonus < 0.0 || noise_std < 0.0 || reference_scale < 0.0) {
    throw std::invalid_argument("environment: scales must be nonnegative");
  }
}

Eigen::VectorXd geometric_target(int vocab_size, int support, double decay) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(vocab_size);
  double w = 1.0;
  for (int i = 0; i < support; ++i, w *= decay) q(i) = w;
  return q / q.sum();
}

Environment Environment::create(const EnvironmentConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  Environment env;
  env.contexts.resize(cfg.num_contexts, cfg.feature_dim);
  for (Eigen::Index i = 0; i < env.contexts.size(); ++i) env.contexts.data()[i] = normal(rng);

  Eigen::MatrixXd w(cfg.vocab_size, cfg.feature_dim);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = cfg.reference_scale * normal(rng);
  env.reference = Policy(std::move(w));

  env.reward_model.target_distribution = geometric_target(cfg.vocab_size, cfg.target_support, cfg.target_decay);
  if (cfg.artifact_token >= 0) env.reward_model.artifact_token = cfg.artifact_token;
  env.reward_model.artifact_bonus = cfg.artifact_bonus;
  env.reward_model.noise_std = cfg.noise_std;
  env.reward_model.validate();
  return env;
}

namespace {

int sample_token(const Eigen::VectorXd& probs, double u) {
  double cumulative = 0.0;
  const Eigen::Index last = probs.size() - 1;
  for (Eigen::Index v = 0; v < last; ++v) {
    cumulative += probs(v);
    if (u < cumulative) return static_cast<int>(v);
  }
  return static_cast<int>(last);
}

}  // namespace

Rollout rollout_contexts(const Policy& policy, const Policy& reference, const Eigen::MatrixXd& contexts,
                         std::span<const int> context_ids, int seq_len, std::mt19937_64& rng) {
  if (seq_len < 1) throw std::invalid_argument("rollout: seq_len must be >= 1");
  const int b_size = static_cast<int>(context_ids.size());
  const int vocab = policy.vocab_size();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Rollout r;
  r.context_ids.assign(context_ids.begin(), context_ids.end());
  r.tokens.assign(static_cast<std::size_t>(b_size), std::vector<int>(static_cast<std::size_t>(seq_len)));
  r.batch.contexts.resize(b_size, policy.feature_dim());
  r.batch.counts = Eigen::MatrixXd::Zero(b_size, vocab);
  r.batch.ref_logp.resize(b_size, vocab);
  r.batch.behavior_logp.resize(b_size, vocab);
  r.batch.seq_len = seq_len;
  r.logp_policy.reserve(static_cast<std::size_t>(b_size * seq_len));
  r.logp_ref.reserve(static_cast<std::size_t>(b_size * seq_len));

  double entropy_sum = 0.0;
  for (int b = 0; b < b_size; ++b) {
    const Eigen::VectorXd phi = contexts.row(context_ids[static_cast<std::size_t>(b)]).transpose();
    r.batch.contexts.row(b) = phi.transpose();
    const Eigen::VectorXd logp = policy.log_probabilities(phi);
    const Eigen::VectorXd logp_ref = reference.log_probabilities(phi);
    const Eigen::VectorXd probs = logp.array().exp();
    r.batch.ref_logp.row(b) = logp_ref.transpose();
    r.batch.behavior_logp.row(b) = logp.transpose();
    entropy_sum += policy.entropy(phi);
    // Context features are fixed for the whole completion, so each position
    // draws from the same next-token distribution.
    for (int l = 0; l < seq_len; ++l) {
      const int tok = sample_token(probs, uniform(rng));
      r.tokens[static_cast<std::size_t>(b)][static_cast<std::size_t>(l)] = tok;
      r.batch.counts(b, tok) += 1.0;
      r.logp_policy.push_back(logp(tok));
      r.logp_ref.push_back(logp_ref(tok));
    }
  }
  r.entropy = b_size > 0 ? entropy_sum / b_size : 0.0;
  return r;
}

Rollout rollout(const Policy& policy, const Environment& env, int batch_size, int seq_len, std::mt19937_64& rng) {
  if (batch_size < 1) throw std::invalid_argument("rollout: batch_size must be >= 1");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(env.contexts.rows()) - 1);
  std::vector<int> ids(static_cast<std::size_t>(batch_size));
  for (int& id : ids) id = pick(rng);
  return rollout_contexts(policy, env.reference, env.contexts, ids, seq_len, rng);
}

}  // namespace safe

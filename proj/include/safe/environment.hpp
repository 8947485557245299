#pragma once

// Desk-scale on-policy environment: a small fixed set of contexts, a frozen
// reference policy, and a synthetic reward model with an optional exploitable
// bonus token.

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "safe/policy.hpp"

namespace safe {

using Policy = SoftmaxPolicy<double>;
using Batch = TokenBatch<double>;

struct SyntheticRewardModel {
  Eigen::VectorXd target_distribution;
  std::optional<int> artifact_token;
  double artifact_bonus = 0.0;
  double noise_std = 0.0;

  void validate() const;
};

/// 1 - 0.5 * ||p_hat - q||_1 between the empirical token distribution and the target.
double base_reward(const SyntheticRewardModel& model, std::span<const int> tokens);

/// Base reward plus the artifact bonus and Gaussian noise, clamped to
/// [0, 1 + artifact_bonus]. Draws from `rng` only when noise_std > 0.
double score(const SyntheticRewardModel& model, std::span<const int> tokens, std::mt19937_64& rng);

struct EnvironmentConfig {
  int vocab_size = 32;
  int feature_dim = 16;
  int num_contexts = 8;
  double reference_scale = 0.25;
  /// Target mass on tokens [0, target_support), decaying geometrically by target_decay.
  int target_support = 8;
  double target_decay = 0.7;
  int artifact_token = 0;  ///< negative disables the artifact
  double artifact_bonus = 0.5;
  double noise_std = 0.02;

  void validate() const;
};

struct Environment {
  Eigen::MatrixXd contexts;  ///< num_contexts x F
  Policy reference;
  SyntheticRewardModel reward_model;

  /// Draws contexts and reference weights from `rng`.
  static Environment create(const EnvironmentConfig& cfg, std::mt19937_64& rng);
};

Eigen::VectorXd geometric_target(int vocab_size, int support, double decay);

struct Rollout {
  std::vector<int> context_ids;        ///< B
  std::vector<std::vector<int>> tokens;  ///< B x L
  Batch batch;                          ///< contexts, counts, reference and sampling log-probs
  std::vector<double> logp_policy;     ///< per token, row-major over (b, l)
  std::vector<double> logp_ref;
  double entropy = 0.0;                 ///< mean per-token entropy of the policy
};

/// Samples `batch_size` contexts and `seq_len` tokens for each.
Rollout rollout(const Policy& policy, const Environment& env, int batch_size, int seq_len,
                std::mt19937_64& rng);

/// Rollout over caller-chosen contexts.
Rollout rollout_contexts(const Policy& policy, const Policy& reference, const Eigen::MatrixXd& contexts,
                         std::span<const int> context_ids, int seq_len, std::mt19937_64& rng);

}  // namespace safe

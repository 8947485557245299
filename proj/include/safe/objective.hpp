#pragma once

// Reward normalization, advantage standardization, the clipped surrogate and
// assembly of the composite loss.

#include <Eigen/Dense>

#include <string>

#include "safe/adaptive_control.hpp"
#include "safe/numerics.hpp"

namespace safe {

inline constexpr double kNormEps = 1e-8;

/// Updates `moments` with the batch, then returns (r - mu) / (sigma + eps).
Eigen::VectorXd normalize_rewards(RunningMoments& moments, const Eigen::VectorXd& rewards);

/// (x - mean) / (std + eps), or zeros when the batch is degenerate.
Eigen::VectorXd standardize(const Eigen::VectorXd& x);

struct Advantages {
  Eigen::VectorXd raw;
  Eigen::VectorXd standardized;
};

Advantages compute_advantages(const Eigen::VectorXd& rewards_norm, const Eigen::VectorXd& v_soft);

struct NormalizedBatch {
  Eigen::VectorXd rewards_raw;
  Eigen::VectorXd rewards_norm;
  Eigen::VectorXd advantages;
  Eigen::VectorXd advantages_std;
};

/// Ratios beyond exp(kMaxLogRatio) are treated as divergence.
inline constexpr double kMaxLogRatio = 30.0;

/// -mean_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) with rho_i = exp(logp_new_i - logp_old_i).
double ppo_loss(const Eigen::VectorXd& logp_new, const Eigen::VectorXd& logp_old,
                const Eigen::VectorXd& adv, double epsilon);

/// d ppo_loss / d logp_new, elementwise. Zero where the clipped branch is
/// selected.
Eigen::VectorXd ppo_loss_grad(const Eigen::VectorXd& logp_new, const Eigen::VectorXd& logp_old,
                              const Eigen::VectorXd& adv, double epsilon);

struct PenaltyDiagnostics {
  double tau_t = 0.0;
  Phase phase = Phase::Warmup;
  double gate = 0.5;
  double kl_short = 0.0;
  double kl_long = 0.0;
  double kl_raw = 0.0;
  double preview_scale = 1.0;
};

struct PenaltyBreakdown {
  double l_ppo = 0.0;
  double l_value = 0.0;
  double l_kl = 0.0;    ///< entropy-gated penalty plus L_AKL when enabled
  double l_gated = 0.0;
  double l_asym = 0.0;
  double l_mom = 0.0;
  double entropy = 0.0;
  double entropy_bonus = 0.0;  ///< beta * entropy
  double l_total = 0.0;
  PenaltyDiagnostics diagnostics;
};

struct LossParts {
  double l_ppo = 0.0;
  double l_value = 0.0;
  double l_gated = 0.0;
  double l_asym = 0.0;
  double l_mom = 0.0;
  double entropy = 0.0;
  bool asym_enabled = true;
};

/// L_total = L_PPO + 0.5 L_value + L_KL - beta H.
PenaltyBreakdown total_loss(const LossParts& parts, double beta);

}  // namespace safe

#include "safe/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safe {

Eigen::VectorXd normalize_rewards(RunningMoments& moments, const Eigen::VectorXd& rewards) {
  if (rewards.size() == 0) throw std::invalid_argument("normalize_rewards: empty batch");
  moments.push(std::span<const double>(rewards.data(), static_cast<std::size_t>(rewards.size())));
  const double sigma = moments.stddev();
  return (rewards.array() - moments.mean()) / (sigma + kNormEps);
}

Eigen::VectorXd standardize(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 2) return Eigen::VectorXd::Zero(n);
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / static_cast<double>(n));
  if (sd == 0.0) return Eigen::VectorXd::Zero(n);
  return (x.array() - mean) / (sd + kNormEps);
}

Advantages compute_advantages(const Eigen::VectorXd& rewards_norm, const Eigen::VectorXd& v_soft) {
  if (rewards_norm.size() != v_soft.size()) throw std::invalid_argument("compute_advantages: length mismatch");
  if (rewards_norm.size() == 0) throw std::invalid_argument("compute_advantages: empty batch");
  Advantages a;
  a.raw = rewards_norm - v_soft;
  a.standardized = standardize(a.raw);
  return a;
}

namespace {

void check_ppo_inputs(const Eigen::VectorXd& logp_new, const Eigen::VectorXd& logp_old,
                      const Eigen::VectorXd& adv, double epsilon) {
  if (logp_new.size() != logp_old.size() || logp_new.size() != adv.size()) {
    throw std::invalid_argument("ppo_loss: length mismatch");
  }
  if (logp_new.size() == 0) throw std::invalid_argument("ppo_loss: empty batch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("ppo_loss: epsilon must be positive");
  for (Eigen::Index i = 0; i < logp_new.size(); ++i) {
    const double d = logp_new(i) - logp_old(i);
    if (!std::isfinite(d) || std::abs(d) > kMaxLogRatio) {
      throw std::domain_error("ppo_loss: importance ratio diverged");
    }
  }
}

}  // namespace

double ppo_loss(const Eigen::VectorXd& logp_new, const Eigen::VectorXd& logp_old,
                const Eigen::VectorXd& adv, double epsilon) {
  check_ppo_inputs(logp_new, logp_old, adv, epsilon);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < adv.size(); ++i) {
    const double rho = std::exp(logp_new(i) - logp_old(i));
    const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
    sum += std::min(rho * adv(i), clipped * adv(i));
  }
  return -sum / static_cast<double>(adv.size());
}

Eigen::VectorXd ppo_loss_grad(const Eigen::VectorXd& logp_new, const Eigen::VectorXd& logp_old,
                              const Eigen::VectorXd& adv, double epsilon) {
  check_ppo_inputs(logp_new, logp_old, adv, epsilon);
  const double inv = 1.0 / static_cast<double>(adv.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(adv.size());
  for (Eigen::Index i = 0; i < adv.size(); ++i) {
    const double rho = std::exp(logp_new(i) - logp_old(i));
    // The unclipped term is the active minimum unless the ratio has left the
    // trust region in the direction the advantage rewards.
    const bool clipped = (adv(i) > 0.0 && rho > 1.0 + epsilon) || (adv(i) < 0.0 && rho < 1.0 - epsilon);
    if (!clipped) g(i) = -rho * adv(i) * inv;
  }
  return g;
}

PenaltyBreakdown total_loss(const LossParts& parts, double beta) {
  for (double v : {parts.l_ppo, parts.l_value, parts.l_gated, parts.l_asym, parts.l_mom, parts.entropy, beta}) {
    if (!std::isfinite(v)) throw std::domain_error("total_loss: non-finite component");
  }
  PenaltyBreakdown b;
  b.l_ppo = parts.l_ppo;
  b.l_value = parts.l_value;
  b.l_gated = parts.l_gated;
  b.l_asym = parts.asym_enabled ? parts.l_asym : 0.0;
  b.l_mom = parts.asym_enabled ? parts.l_mom : 0.0;
  b.l_kl = b.l_gated + b.l_asym + b.l_mom;
  b.entropy = parts.entropy;
  b.entropy_bonus = beta * parts.entropy;
  b.l_total = b.l_ppo + 0.5 * b.l_value + b.l_kl - b.entropy_bonus;
  return b;
}

}  // namespace safe

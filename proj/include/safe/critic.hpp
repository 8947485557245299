#pragma once

// Twin linear value heads aggregated by a differentiable soft-min.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "safe/numerics.hpp"

namespace safe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// -alpha * log(0.5 * (exp(-v1/alpha) + exp(-v2/alpha))), evaluated relative to
/// the smaller input so no exponent is positive.
template <typename Scalar>
Scalar soft_min(Scalar v1, Scalar v2, Scalar alpha) {
  using std::exp;
  using std::isfinite;
  using std::log;
  if (!(alpha > Scalar(0))) throw std::invalid_argument("soft_min: alpha must be positive");
  if (!isfinite(v1) || !isfinite(v2)) throw std::invalid_argument("soft_min: non-finite input");
  const Scalar lo = v1 < v2 ? v1 : v2;
  const Scalar gap = (v1 < v2 ? v2 : v1) - lo;
  return lo - alpha * log(Scalar(0.5) * (Scalar(1) + exp(-gap / alpha)));
}

/// Partial derivatives of soft_min with respect to (v1, v2); they sum to one.
template <typename Scalar>
std::pair<Scalar, Scalar> soft_min_weights(Scalar v1, Scalar v2, Scalar alpha) {
  using std::exp;
  const Scalar w1 = Scalar(1) / (Scalar(1) + exp((v1 - v2) / alpha));
  return {w1, Scalar(1) - w1};
}

template <typename Scalar>
Scalar huber(Scalar error, Scalar delta) {
  using std::abs;
  const Scalar a = abs(error);
  return a <= delta ? Scalar(0.5) * error * error : delta * (a - Scalar(0.5) * delta);
}

template <typename Scalar>
Scalar huber_derivative(Scalar error, Scalar delta) {
  if (error > delta) return delta;
  if (error < -delta) return -delta;
  return error;
}

/// 0.5 * [Huber(v_soft - target) + Huber(v_clip - target)].
template <typename Scalar>
Scalar huber_value_loss(Scalar v_soft, Scalar v_clip, Scalar target, Scalar delta) {
  if (!(delta > Scalar(0))) throw std::invalid_argument("huber_value_loss: delta must be positive");
  return Scalar(0.5) * (huber(v_soft - target, delta) + huber(v_clip - target, delta));
}

/// PPO-style clipped value: old + clip(v - old, -radius, radius).
template <typename Scalar>
Scalar clipped_value(Scalar v, Scalar v_old, Scalar radius) {
  const Scalar d = v - v_old;
  return v_old + (d > radius ? radius : (d < -radius ? -radius : d));
}

struct ValueEstimate {
  double v1 = 0.0;
  double v2 = 0.0;
  double v_soft = 0.0;
};

/// Per-feature running standardization standing in for a normalization layer.
class FeatureStandardizer {
 public:
  FeatureStandardizer() = default;
  explicit FeatureStandardizer(int dim) : moments_(static_cast<std::size_t>(dim)) {}

  int dim() const { return static_cast<int>(moments_.size()); }
  void observe(const Eigen::VectorXd& features);
  Eigen::VectorXd apply(const Eigen::VectorXd& features) const;

 private:
  std::vector<RunningMoments> moments_;
};

struct CriticConfig {
  double softmin_alpha = 0.1;
  double polyak_tau = 0.005;
  double huber_delta = 1.0;
  double value_clip = 0.2;
  double init_scale = 0.1;
  bool use_target_for_advantages = false;
};

/// Two online heads and their Polyak targets. Each head is linear in the
/// standardized features plus a bias (stored as the last coefficient).
struct CriticPair {
  Eigen::VectorXd online_a, online_b;
  Eigen::VectorXd target_a, target_b;
  double softmin_alpha = 0.1;
  double polyak_tau = 0.005;
  FeatureStandardizer standardizer;

  CriticPair() = default;
  CriticPair(int feature_dim, double alpha, double tau);

  int feature_dim() const { return standardizer.dim(); }

  /// Independent N(0, scale^2) heads; targets start equal to the online heads.
  void initialize(std::mt19937_64& rng, double scale);

  /// Standardized features with the trailing bias entry.
  Eigen::VectorXd design_row(const Eigen::VectorXd& features) const;
};

ValueEstimate predict(const CriticPair& pair, const Eigen::VectorXd& features, bool use_target);
ValueEstimate predict_row(const CriticPair& pair, const Eigen::VectorXd& design_row, bool use_target);

/// theta' <- (1 - tau) theta' + tau theta for both heads.
CriticPair polyak_update(CriticPair pair);

struct ValueLossResult {
  double loss = 0.0;
  Eigen::VectorXd grad_a;
  Eigen::VectorXd grad_b;
};

/// Batch mean of the clipped Huber value loss and its gradient with respect to
/// both online heads. `design` holds one design row per sample.
ValueLossResult value_loss_and_grad(const CriticPair& pair, const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& targets, const Eigen::VectorXd& v_old,
                                    double delta, double clip_radius);

}  // namespace safe

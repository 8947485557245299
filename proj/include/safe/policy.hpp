#pragma once

// Linear-softmax token policy: pi(v | s) = softmax(W phi(s))_v.
//
// Tokens of a completion are drawn i.i.d. from the context's distribution, so
// every sequence-level quantity is a function of the per-context token counts:
//   log pi(y | s)           = sum_v n_v log pi_v
//   d log pi(y | s) / dW    = (n - L pi) phi^T
// where n is the count vector and L the completion length.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace safe {

template <typename Scalar>
class SoftmaxPolicy {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SoftmaxPolicy() = default;
  SoftmaxPolicy(int vocab_size, int feature_dim) : weights_(MatrixType::Zero(vocab_size, feature_dim)) {}
  explicit SoftmaxPolicy(MatrixType weights) : weights_(std::move(weights)) {}

  int vocab_size() const { return static_cast<int>(weights_.rows()); }
  int feature_dim() const { return static_cast<int>(weights_.cols()); }

  const MatrixType& weights() const { return weights_; }
  MatrixType& weights() { return weights_; }

  /// Log-probabilities for one context, via a max-shifted log-sum-exp.
  VectorType log_probabilities(const VectorType& features) const {
    if (features.size() != feature_dim()) throw std::invalid_argument("SoftmaxPolicy: feature dimension mismatch");
    const VectorType logits = weights_ * features;
    const Scalar top = logits.maxCoeff();
    using std::log;
    const Scalar lse = top + log((logits.array() - top).exp().sum());
    return logits.array() - lse;
  }

  VectorType probabilities(const VectorType& features) const { return log_probabilities(features).array().exp(); }

  /// Shannon entropy in nats.
  Scalar entropy(const VectorType& features) const {
    const VectorType logp = log_probabilities(features);
    Scalar h(0);
    for (Eigen::Index v = 0; v < logp.size(); ++v) {
      using std::exp;
      const Scalar p = exp(logp(v));
      if (p > Scalar(0)) h -= p * logp(v);
    }
    return h;
  }

 private:
  MatrixType weights_;
};

/// A sampled batch summarized by token counts, with the reference and the
/// sampling-policy log-probs frozen at sampling time.
template <typename Scalar>
struct TokenBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> contexts;       ///< B x F
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> counts;         ///< B x V
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> ref_logp;       ///< B x V
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> behavior_logp;  ///< B x V
  int seq_len = 1;

  Eigen::Index size() const { return contexts.rows(); }
  Scalar token_count() const { return Scalar(size()) * Scalar(seq_len); }
};

/// Sequence log-likelihood per batch row.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sequence_logp(const SoftmaxPolicy<Scalar>& policy,
                                                        const TokenBatch<Scalar>& batch) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(batch.size());
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    out(b) = batch.counts.row(b).dot(policy.log_probabilities(batch.contexts.row(b).transpose()).transpose());
  }
  return out;
}

/// Monte Carlo log-ratio KL estimate of `policy` from the batch samples,
/// importance weighted by pi / pi_behavior per token:
///   D_hat = 1/N sum_tokens w_a (log pi_a - log pi_ref_a),  w_a = pi_a / pi_behavior_a.
/// At the sampling policy every weight is exactly 1 and this is the plain
/// log-ratio mean; away from it the gradient is the score-function gradient
/// of the KL rather than the (zero-mean) gradient of the fixed-sample mean.
template <typename Scalar>
Scalar kl_estimate(const SoftmaxPolicy<Scalar>& policy, const TokenBatch<Scalar>& batch) {
  Scalar sum(0);
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto logp = policy.log_probabilities(batch.contexts.row(b).transpose());
    const auto w = (logp.transpose() - batch.behavior_logp.row(b)).array().exp();
    sum += (batch.counts.row(b).array() * w * (logp.transpose() - batch.ref_logp.row(b)).array()).sum();
  }
  return sum / batch.token_count();
}

/// Mean per-context policy entropy over the batch contexts.
template <typename Scalar>
Scalar mean_entropy(const SoftmaxPolicy<Scalar>& policy, const TokenBatch<Scalar>& batch) {
  Scalar sum(0);
  for (Eigen::Index b = 0; b < batch.size(); ++b) sum += policy.entropy(batch.contexts.row(b).transpose());
  return sum / Scalar(batch.size());
}

/// Gradient of
///   sum_b seq_coef_b * log pi(y_b | s_b) + kl_coef * D_hat + entropy_coef * H_mean
/// with respect to the policy weights.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> policy_gradient(
    const SoftmaxPolicy<Scalar>& policy, const TokenBatch<Scalar>& batch,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& seq_coef, Scalar kl_coef, Scalar entropy_coef) {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (seq_coef.size() != batch.size()) throw std::invalid_argument("policy_gradient: coefficient length mismatch");

  MatrixType grad = MatrixType::Zero(policy.vocab_size(), policy.feature_dim());
  const Scalar len(batch.seq_len);
  const Scalar per_token = kl_coef / batch.token_count();
  const Scalar per_context = entropy_coef / Scalar(batch.size());
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const VectorType phi = batch.contexts.row(b).transpose();
    const VectorType logp = policy.log_probabilities(phi);
    const VectorType p = logp.array().exp();
    const VectorType score = batch.counts.row(b).transpose() - len * p;  // d seq_logp / d logits

    // d/dz_u sum_v n_v w_v f_v = a_u - p_u sum(a),  a_v = n_v w_v (f_v + 1)
    const VectorType w = (logp - batch.behavior_logp.row(b).transpose()).array().exp();
    const VectorType f = logp - batch.ref_logp.row(b).transpose();
    const VectorType a = (batch.counts.row(b).transpose().array() * w.array() * (f.array() + Scalar(1))).matrix();
    const VectorType d_kl = a - a.sum() * p;

    // d H / d logits_v = -p_v (log p_v + H)
    Scalar h(0);
    for (Eigen::Index v = 0; v < p.size(); ++v) h -= p(v) * logp(v);
    const VectorType d_entropy = -(p.array() * (logp.array() + h)).matrix();

    const VectorType d_logits = seq_coef(b) * score + per_token * d_kl + per_context * d_entropy;
    grad.noalias() += d_logits * phi.transpose();
  }
  return grad;
}

/// Rescales `grad` in place so its Frobenius norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Derived>
typename Derived::Scalar clip_grad_norm(Eigen::MatrixBase<Derived>& grad, typename Derived::Scalar max_norm) {
  const auto norm = grad.norm();
  if (norm > max_norm && norm > 0) grad *= max_norm / norm;
  return norm;
}

}  // namespace safe

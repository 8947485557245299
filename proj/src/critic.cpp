#include "safe/critic.hpp"

namespace safe {

void FeatureStandardizer::observe(const Eigen::VectorXd& features) {
  if (features.size() != dim()) throw std::invalid_argument("FeatureStandardizer: dimension mismatch");
  for (int i = 0; i < dim(); ++i) moments_[static_cast<std::size_t>(i)].push(features(i));
}

Eigen::VectorXd FeatureStandardizer::apply(const Eigen::VectorXd& features) const {
  if (features.size() != dim()) throw std::invalid_argument("FeatureStandardizer: dimension mismatch");
  Eigen::VectorXd out(features.size());
  for (int i = 0; i < dim(); ++i) {
    const RunningMoments& m = moments_[static_cast<std::size_t>(i)];
    out(i) = (features(i) - m.mean()) / (m.stddev() + 1e-8);
  }
  return out;
}

CriticPair::CriticPair(int feature_dim, double alpha, double tau)
    : online_a(Eigen::VectorXd::Zero(feature_dim + 1)),
      online_b(Eigen::VectorXd::Zero(feature_dim + 1)),
      target_a(Eigen::VectorXd::Zero(feature_dim + 1)),
      target_b(Eigen::VectorXd::Zero(feature_dim + 1)),
      softmin_alpha(alpha),
      polyak_tau(tau),
      standardizer(feature_dim) {
  if (!(alpha > 0.0)) throw std::invalid_argument("CriticPair: softmin_alpha must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("CriticPair: polyak_tau must lie in [0, 1]");
}

void CriticPair::initialize(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < online_a.size(); ++i) online_a(i) = scale * normal(rng);
  for (Eigen::Index i = 0; i < online_b.size(); ++i) online_b(i) = scale * normal(rng);
  target_a = online_a;
  target_b = online_b;
}

Eigen::VectorXd CriticPair::design_row(const Eigen::VectorXd& features) const {
  Eigen::VectorXd row(features.size() + 1);
  row.head(features.size()) = standardizer.apply(features);
  row(features.size()) = 1.0;
  return row;
}

ValueEstimate predict_row(const CriticPair& pair, const Eigen::VectorXd& row, bool use_target) {
  const Eigen::VectorXd& a = use_target ? pair.target_a : pair.online_a;
  const Eigen::VectorXd& b = use_target ? pair.target_b : pair.online_b;
  if (row.size() != a.size()) throw std::invalid_argument("predict: dimension mismatch");
  ValueEstimate e;
  e.v1 = a.dot(row);
  e.v2 = b.dot(row);
  e.v_soft = soft_min(e.v1, e.v2, pair.softmin_alpha);
  return e;
}

ValueEstimate predict(const CriticPair& pair, const Eigen::VectorXd& features, bool use_target) {
  if (features.size() != pair.feature_dim()) throw std::invalid_argument("predict: dimension mismatch");
  return predict_row(pair, pair.design_row(features), use_target);
}

CriticPair polyak_update(CriticPair pair) {
  if (!(pair.polyak_tau >= 0.0 && pair.polyak_tau <= 1.0)) {
    throw std::invalid_argument("polyak_update: tau must lie in [0, 1]");
  }
  const double tau = pair.polyak_tau;
  pair.target_a = (1.0 - tau) * pair.target_a + tau * pair.online_a;
  pair.target_b = (1.0 - tau) * pair.target_b + tau * pair.online_b;
  return pair;
}

ValueLossResult value_loss_and_grad(const CriticPair& pair, const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& targets, const Eigen::VectorXd& v_old,
                                    double delta, double clip_radius) {
  const Eigen::Index n = design.rows();
  if (targets.size() != n || v_old.size() != n) {
    throw std::invalid_argument("value_loss_and_grad: length mismatch");
  }
  ValueLossResult out;
  out.grad_a = Eigen::VectorXd::Zero(pair.online_a.size());
  out.grad_b = Eigen::VectorXd::Zero(pair.online_b.size());
  if (n == 0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = design.row(i).transpose();
    const ValueEstimate e = predict_row(pair, row, false);
    const double v_clip = clipped_value(e.v_soft, v_old(i), clip_radius);
    out.loss += huber_value_loss(e.v_soft, v_clip, targets(i), delta);

    // d/dv_soft of the per-sample loss; the clipped branch only passes
    // gradient while the value stays inside the clip radius.
    double d_soft = 0.5 * huber_derivative(e.v_soft - targets(i), delta);
    const double d = e.v_soft - v_old(i);
    if (d > -clip_radius && d < clip_radius) d_soft += 0.5 * huber_derivative(v_clip - targets(i), delta);

    const auto [w1, w2] = soft_min_weights(e.v1, e.v2, pair.softmin_alpha);
    out.grad_a += (d_soft * w1) * row;
    out.grad_b += (d_soft * w2) * row;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  out.grad_a *= inv;
  out.grad_b *= inv;
  return out;
}

}  // namespace safe

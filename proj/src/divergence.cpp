#include "safe/divergence.hpp"

#include <cmath>
#include <stdexcept>

namespace safe {

double estimate_kl(std::span<const KlSample> samples) {
  if (samples.empty()) throw std::invalid_argument("estimate_kl: empty batch");
  double sum = 0.0;
  for (const KlSample& s : samples) sum += s.logp_policy - s.logp_ref;
  return sum / static_cast<double>(samples.size());
}

void AsymConfig::validate() const {
  if (window_w < 2) throw std::invalid_argument("AsymConfig: window_w must be >= 2");
  if (lambda_asym < 0.0 || lambda_mom < 0.0) {
    throw std::invalid_argument("AsymConfig: penalty weights must be nonnegative");
  }
}

double asym_penalty(double d_hat, const AsymConfig& cfg) {
  if (d_hat <= cfg.tau) return 0.0;
  const double excess = d_hat - cfg.tau;
  return cfg.lambda_asym * excess * excess;
}

double asym_penalty_derivative(double d_hat, const AsymConfig& cfg) {
  if (d_hat <= cfg.tau) return 0.0;
  return 2.0 * cfg.lambda_asym * (d_hat - cfg.tau);
}

std::optional<double> lagged_estimate(const KlTracker& tracker, const AsymConfig& cfg) {
  if (tracker.history.size() <= cfg.window_w) return std::nullopt;
  return tracker.history.back(cfg.window_w);
}

AsymEval asym_evaluate(double d_hat, std::optional<double> d_lag, const AsymConfig& cfg) {
  AsymEval e;
  e.l_asym = asym_penalty(d_hat, cfg);
  e.derivative = asym_penalty_derivative(d_hat, cfg);
  if (d_lag) {
    const double w = static_cast<double>(cfg.window_w);
    const double m = (d_hat - *d_lag) / w;
    if (m > 0.0) {
      e.l_mom = cfg.lambda_mom * m * m;
      e.derivative += 2.0 * cfg.lambda_mom * m / w;
    }
  }
  return e;
}

double momentum_penalty(const KlTracker& tracker, const AsymConfig& cfg) {
  const std::optional<double> lag = lagged_estimate(tracker, cfg);
  if (!lag) return 0.0;
  const double m = (tracker.history.back() - *lag) / static_cast<double>(cfg.window_w);
  return m > 0.0 ? cfg.lambda_mom * m * m : 0.0;
}

AsymStep asym_controller_step(KlTracker& tracker, double d_hat, const AsymConfig& cfg) {
  if (!std::isfinite(d_hat)) throw std::invalid_argument("asym_controller_step: non-finite estimate");
  tracker.history.push(d_hat);
  AsymStep s;
  s.l_asym = asym_penalty(d_hat, cfg);
  s.l_mom = momentum_penalty(tracker, cfg);
  s.l_total = s.l_asym + s.l_mom;
  return s;
}

}  // namespace safe

#pragma once

// Monte Carlo KL estimation and the asymmetric KL controller with momentum.

#include <cstddef>
#include <optional>
#include <span>

#include "safe/numerics.hpp"

namespace safe {

/// Log-probabilities of one sampled token under the policy and the reference.
struct KlSample {
  double logp_policy = 0.0;
  double logp_ref = 0.0;
};

/// Batch mean of log pi(a) - log pi_ref(a). May be negative.
double estimate_kl(std::span<const KlSample> samples);

struct AsymConfig {
  double tau = 0.2;
  double lambda_asym = 0.5;
  double lambda_mom = 0.5;
  std::size_t window_w = 10;

  void validate() const;
};

/// Short (0.9) and long (0.99) EMAs of the raw estimate plus a buffer of the
/// raw per-step estimates for the momentum term.
struct KlTracker {
  Ema short_ema{0.9};
  Ema long_ema{0.99};
  RollingWindow history{20};

  KlTracker() = default;
  explicit KlTracker(std::size_t window_w) : history(2 * window_w) {}
};

/// lambda_asym * (d_hat - tau)^2 above tau, zero otherwise.
double asym_penalty(double d_hat, const AsymConfig& cfg);
double asym_penalty_derivative(double d_hat, const AsymConfig& cfg);

/// Raw estimate w steps before the newest history entry, if recorded.
std::optional<double> lagged_estimate(const KlTracker& tracker, const AsymConfig& cfg);

/// lambda_mom * m^2 with m = (D[t] - D[t-w]) / w when m > 0; zero otherwise or
/// when the history does not reach back w steps.
double momentum_penalty(const KlTracker& tracker, const AsymConfig& cfg);

struct AsymStep {
  double l_asym = 0.0;
  double l_mom = 0.0;
  double l_total = 0.0;
};

/// Appends d_hat to the history and returns both penalties and their sum.
AsymStep asym_controller_step(KlTracker& tracker, double d_hat, const AsymConfig& cfg);

/// L_AKL for a newest estimate d_hat against a fixed lagged estimate, with
/// its derivative in d_hat. Used to re-evaluate the penalty as the policy moves.
struct AsymEval {
  double l_asym = 0.0;
  double l_mom = 0.0;
  double derivative = 0.0;
};
AsymEval asym_evaluate(double d_hat, std::optional<double> d_lag, const AsymConfig& cfg);

}  // namespace safe

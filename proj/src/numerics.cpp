#include "safe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace safe {

Ema::Ema(double retention_coeff) : retention(retention_coeff) {
  if (!(retention_coeff > 0.0 && retention_coeff <= 1.0)) {
    throw std::invalid_argument("Ema: retention must lie in (0, 1]");
  }
}

double Ema::peek(double x) const {
  if (!initialized) return x;
  return retention * value + (1.0 - retention) * x;
}

Ema ema_update(Ema state, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("ema_update: non-finite input");
  state.value = state.peek(x);
  state.initialized = true;
  return state;
}

void RunningMoments::push(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void RunningMoments::push(std::span<const double> xs) {
  for (double x : xs) push(x);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double n_a = static_cast<double>(count_);
  const double n_b = static_cast<double>(other.count_);
  const double n = n_a + n_b;
  const double delta = other.mean_ - mean_;
  mean_ += delta * n_b / n;
  m2_ += other.m2_ + delta * delta * n_a * n_b / n;
  count_ += other.count_;
}

double RunningMoments::variance() const {
  if (count_ < 2) return 0.0;
  return std::max(0.0, m2_ / static_cast<double>(count_));
}

double RunningMoments::stddev() const { return std::sqrt(variance()); }

RollingWindow::RollingWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("RollingWindow: capacity must be positive");
}

void RollingWindow::push(double x) {
  if (values_.size() == capacity_) values_.pop_front();
  values_.push_back(x);
}

double RollingWindow::back(std::size_t lag) const {
  if (lag >= values_.size()) throw std::out_of_range("RollingWindow::back: lag exceeds size");
  return values_[values_.size() - 1 - lag];
}

double RollingWindow::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

double RollingWindow::stddev() const {
  const std::vector<double> v = values();
  return stddev_of(v);
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

double rolling_std(std::span<const double> xs, std::size_t window) {
  if (window == 0) throw std::invalid_argument("rolling_std: window must be positive");
  if (xs.size() < window) return stddev_of(xs);
  double total = 0.0;
  const std::size_t n_windows = xs.size() - window + 1;
  for (std::size_t i = 0; i < n_windows; ++i) total += stddev_of(xs.subspan(i, window));
  return total / static_cast<double>(n_windows);
}

std::size_t detect_crashes(std::span<const double> rewards, std::size_t recent_window,
                           double drop_fraction) {
  if (recent_window == 0) throw std::invalid_argument("detect_crashes: window must be >= 1");
  if (!(drop_fraction > 0.0 && drop_fraction < 1.0)) {
    throw std::invalid_argument("detect_crashes: drop_fraction must lie in (0, 1)");
  }
  std::size_t events = 0;
  bool in_excursion = false;
  for (std::size_t t = recent_window; t < rewards.size(); ++t) {
    const double recent = mean_of(rewards.subspan(t - recent_window, recent_window));
    const bool below = rewards[t] < (1.0 - drop_fraction) * recent;
    if (below && !in_excursion) ++events;
    in_excursion = below;
  }
  return events;
}

std::size_t count_spikes(std::span<const double> values, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [threshold](double v) { return v > threshold; }));
}

StabilityReport stability_report(std::span<const double> rewards, std::span<const double> kl,
                                 std::span<const double> value_losses, const MetricsConfig& cfg) {
  StabilityReport r;
  if (rewards.empty()) return r;
  r.mean_reward = mean_of(rewards);
  r.reward_std = stddev_of(rewards);
  r.reward_cv = r.mean_reward != 0.0 ? r.reward_std / std::abs(r.mean_reward) : 0.0;
  r.rolling_reward_std = rolling_std(rewards, cfg.rolling_window);
  r.crash_count = detect_crashes(rewards, cfg.crash_window, cfg.crash_drop_fraction);
  r.value_spike_count = count_spikes(value_losses, cfg.value_spike_threshold);
  r.kl_rolling_std = kl.empty() ? 0.0 : rolling_std(kl, cfg.rolling_window);
  return r;
}

}  // namespace safe

#pragma once

// Scalar statistics shared by the controllers and the stability metrics.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace safe {

/// Exponential moving average storing the retention coefficient:
/// value_t = retention * value_{t-1} + (1 - retention) * x_t.
/// The first observation seeds the average directly.
struct Ema {
  double retention = 0.9;
  double value = 0.0;
  bool initialized = false;

  Ema() = default;
  explicit Ema(double retention);

  /// Value the average would take after observing x, without committing it.
  double peek(double x) const;
  /// Derivative of peek(x) with respect to x.
  double sensitivity() const { return initialized ? 1.0 - retention : 1.0; }
};

Ema ema_update(Ema state, double x);

/// Welford running mean and population variance.
class RunningMoments {
 public:
  void push(double x);
  void push(std::span<const double> xs);
  void merge(const RunningMoments& other);

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const;
  double stddev() const;

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Fixed-capacity FIFO of reals; oldest entries are evicted first.
class RollingWindow {
 public:
  explicit RollingWindow(std::size_t capacity);

  void push(double x);
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return values_.empty(); }

  /// Element `lag` positions before the newest (lag 0 is the newest).
  double back(std::size_t lag = 0) const;
  double mean() const;
  double stddev() const;
  std::vector<double> values() const { return {values_.begin(), values_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

double mean_of(std::span<const double> xs);
/// Population standard deviation (two-pass).
double stddev_of(std::span<const double> xs);

/// Mean of the population std over every full trailing window of `window` steps.
/// Sequences shorter than the window fall back to the global std.
double rolling_std(std::span<const double> xs, std::size_t window);

/// Counts reward-crash events: steps whose reward falls below
/// (1 - drop_fraction) of the mean over the preceding `recent_window` steps.
/// Consecutive below-threshold steps form a single event.
std::size_t detect_crashes(std::span<const double> rewards, std::size_t recent_window,
                           double drop_fraction);

/// Number of entries strictly above threshold.
std::size_t count_spikes(std::span<const double> values, double threshold);

struct StabilityReport {
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double reward_cv = 0.0;
  double rolling_reward_std = 0.0;
  std::size_t crash_count = 0;
  std::size_t value_spike_count = 0;
  double kl_rolling_std = 0.0;
};

struct MetricsConfig {
  std::size_t crash_window = 20;
  double crash_drop_fraction = 0.2;
  std::size_t rolling_window = 50;
  double value_spike_threshold = 0.1;
};

StabilityReport stability_report(std::span<const double> rewards, std::span<const double> kl,
                                 std::span<const double> value_losses,
                                 const MetricsConfig& cfg = {});

}  // namespace safe

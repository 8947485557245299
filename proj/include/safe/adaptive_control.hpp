#pragma once

// Entropy-aware predictive controller: a PID loop on reward velocity sets the
// KL threshold, a phase detector scales it, and the KL penalty is gated by
// policy entropy.

#include <optional>
#include <string>
#include <string_view>

#include "safe/divergence.hpp"
#include "safe/numerics.hpp"

namespace safe {

struct PidConfig {
  double kp = 2.0;
  double ki = 0.5;
  double kd = 1.0;
  double v_target = 0.001;
  double reward_retention = 0.95;
  double integral_limit = 1.0;
};

struct PidState {
  PidConfig gains;
  double integral = 0.0;
  double prev_error = 0.0;
  Ema reward_ema{0.95};
  double prev_reward_ema = 0.0;

  PidState() = default;
  explicit PidState(const PidConfig& cfg) : gains(cfg), reward_ema(cfg.reward_retention) {}
};

struct PidOutput {
  double error = 0.0;
  double output = 0.0;
};

/// Feeds one reward. The first reward only seeds the EMA (no velocity yet)
/// and yields a zero output; afterwards e_t = dEMA - v_target drives the loop.
PidOutput pid_step(PidState& state, double reward);

enum class Phase { Warmup, Climbing, Plateau, Converged };

std::string_view phase_name(Phase p);
std::optional<Phase> parse_phase(std::string_view name);

struct PhaseConfig {
  std::size_t history = 100;
  std::size_t half_window = 50;
  double climb_margin = 0.01;
  double converged_std = 0.02;
  double converged_mean = 0.7;
  double warmup_multiplier = 1.5;
  double climbing_multiplier = 1.2;
  double plateau_multiplier = 0.8;
  double converged_multiplier = 1.0;

  double multiplier(Phase p) const;
};

struct PhaseState {
  PhaseConfig cfg;
  RollingWindow history{100};
  Phase current_phase = Phase::Warmup;
  double multiplier = 1.5;

  PhaseState() = default;
  explicit PhaseState(const PhaseConfig& c) : cfg(c), history(c.history), multiplier(c.warmup_multiplier) {}
};

struct PhaseOutput {
  Phase phase = Phase::Warmup;
  double multiplier = 1.5;
};

PhaseOutput detect_phase(PhaseState& state, double reward);

struct ThresholdConfig {
  double tau_base = 0.3;
  double clip_lo = 0.1;
  double clip_hi = 0.6;

  void validate() const;
};

/// clamp((tau_base + pid_output) * multiplier, clip_lo, clip_hi).
double adaptive_threshold(double pid_output, const ThresholdConfig& cfg, double multiplier);

struct EntropyGateConfig {
  double h_floor = 2.0;
  double epsilon_e = 0.1;
  double lambda_pen = 1.0;

  void validate() const;
};

/// max(0.5, h_floor / (entropy + epsilon_e)).
double entropy_gate(double entropy, const EntropyGateConfig& cfg);
/// d gate / d entropy (zero on the 0.5 floor).
double entropy_gate_derivative(double entropy, const EntropyGateConfig& cfg);

double gated_kl_penalty(double kl_smoothed, double tau, double entropy, const EntropyGateConfig& cfg);

/// Penalty value with its partial derivatives in the smoothed KL and the entropy.
struct GatedPenalty {
  double value = 0.0;
  double d_kl = 0.0;
  double d_entropy = 0.0;
};
GatedPenalty gated_kl_penalty_with_grad(double kl_smoothed, double tau, double entropy,
                                        const EntropyGateConfig& cfg);

struct PreviewConfig {
  double d_max = 0.5;
  bool enabled = false;
};

/// Update scale in (0, 1]: d_max / kl_preview when enabled and exceeded.
double preview_scale(double kl_preview, const PreviewConfig& cfg);

struct ControllerConfig {
  double kl_short_retention = 0.9;
  double kl_long_retention = 0.99;
  PidConfig pid;
  PhaseConfig phase;
  ThresholdConfig threshold;
  EntropyGateConfig gate;
  PreviewConfig preview;
};

/// Mutable state of the predictive controller. The KL tracker is shared with
/// the asymmetric controller so both see one history.
struct ControllerState {
  KlTracker kl;
  PidState pid;
  PhaseState phase;

  ControllerState() = default;
  ControllerState(const ControllerConfig& cfg, std::size_t momentum_window)
      : kl(momentum_window), pid(cfg.pid), phase(cfg.phase) {
    kl.short_ema = Ema(cfg.kl_short_retention);
    kl.long_ema = Ema(cfg.kl_long_retention);
  }
};

struct ControllerDiagnostics {
  double tau_t = 0.0;
  Phase phase = Phase::Warmup;
  double multiplier = 1.5;
  double gate = 0.5;
  double kl_short = 0.0;
  double kl_long = 0.0;
  double kl_short_prev = 0.0;  ///< short EMA before this step's update
  bool kl_short_seeded = false;  ///< true when this step's estimate seeded the EMA
  double pid_error = 0.0;
  double pid_output = 0.0;
  double integral = 0.0;
};

struct ControllerStep {
  double penalty = 0.0;
  ControllerDiagnostics diag;
};

/// One step of the predictive controller in algorithm order: KL EMAs, PID,
/// phase, threshold, gated penalty on the short EMA.
ControllerStep controller_step(ControllerState& state, const ControllerConfig& cfg, double d_hat,
                               double entropy, double reward);

}  // namespace safe

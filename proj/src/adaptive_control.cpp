#include "safe/adaptive_control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safe {

PidOutput pid_step(PidState& state, double reward) {
  if (!std::isfinite(reward)) throw std::invalid_argument("pid_step: non-finite reward");
  if (!state.reward_ema.initialized) {
    state.reward_ema = ema_update(state.reward_ema, reward);
    state.prev_reward_ema = state.reward_ema.value;
    return {};
  }
  state.prev_reward_ema = state.reward_ema.value;
  state.reward_ema = ema_update(state.reward_ema, reward);

  const PidConfig& g = state.gains;
  const double velocity = state.reward_ema.value - state.prev_reward_ema;
  const double error = velocity - g.v_target;
  state.integral = std::clamp(state.integral + error, -g.integral_limit, g.integral_limit);
  const double output = g.kp * error + g.ki * state.integral + g.kd * (error - state.prev_error);
  state.prev_error = error;
  return {error, output};
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Warmup: return "warmup";
    case Phase::Climbing: return "climbing";
    case Phase::Plateau: return "plateau";
    case Phase::Converged: return "converged";
  }
  return "unknown";
}

std::optional<Phase> parse_phase(std::string_view name) {
  for (Phase p : {Phase::Warmup, Phase::Climbing, Phase::Plateau, Phase::Converged}) {
    if (phase_name(p) == name) return p;
  }
  return std::nullopt;
}

double PhaseConfig::multiplier(Phase p) const {
  switch (p) {
    case Phase::Warmup: return warmup_multiplier;
    case Phase::Climbing: return climbing_multiplier;
    case Phase::Plateau: return plateau_multiplier;
    case Phase::Converged: return converged_multiplier;
  }
  return 1.0;
}

PhaseOutput detect_phase(PhaseState& state, double reward) {
  if (!std::isfinite(reward)) throw std::invalid_argument("detect_phase: non-finite reward");
  const PhaseConfig& c = state.cfg;
  state.history.push(reward);

  Phase phase = Phase::Warmup;
  const std::size_t n = state.history.size();
  if (n >= c.half_window) {
    // Oldest-first copy; "recent" is the trailing half window, "old" whatever
    // precedes it (shorter than a half window until the history fills).
    const std::vector<double> h = state.history.values();
    const std::span<const double> all(h);
    const auto recent = all.last(c.half_window);
    const std::size_t old_len = std::min(n - c.half_window, c.half_window);
    const auto old = all.subspan(n - c.half_window - old_len, old_len);

    const double recent_mean = mean_of(recent);
    const double recent_std = stddev_of(recent);
    if (!old.empty() && recent_mean > mean_of(old) + c.climb_margin) {
      phase = Phase::Climbing;
    } else if (recent_std < c.converged_std && recent_mean > c.converged_mean) {
      phase = Phase::Converged;
    } else {
      phase = Phase::Plateau;
    }
  }
  state.current_phase = phase;
  state.multiplier = c.multiplier(phase);
  return {phase, state.multiplier};
}

void ThresholdConfig::validate() const {
  if (!(clip_lo < clip_hi)) throw std::invalid_argument("ThresholdConfig: clip_lo must be < clip_hi");
}

double adaptive_threshold(double pid_output, const ThresholdConfig& cfg, double multiplier) {
  return std::clamp((cfg.tau_base + pid_output) * multiplier, cfg.clip_lo, cfg.clip_hi);
}

void EntropyGateConfig::validate() const {
  if (!(h_floor > 0.0)) throw std::invalid_argument("EntropyGateConfig: h_floor must be positive");
  if (!(epsilon_e > 0.0)) throw std::invalid_argument("EntropyGateConfig: epsilon_e must be positive");
  if (lambda_pen < 0.0) throw std::invalid_argument("EntropyGateConfig: lambda_pen must be nonnegative");
}

double entropy_gate(double entropy, const EntropyGateConfig& cfg) {
  if (!(entropy >= 0.0)) throw std::invalid_argument("entropy_gate: entropy must be nonnegative");
  return std::max(0.5, cfg.h_floor / (entropy + cfg.epsilon_e));
}

double entropy_gate_derivative(double entropy, const EntropyGateConfig& cfg) {
  const double denom = entropy + cfg.epsilon_e;
  if (cfg.h_floor / denom <= 0.5) return 0.0;
  return -cfg.h_floor / (denom * denom);
}

double gated_kl_penalty(double kl_smoothed, double tau, double entropy, const EntropyGateConfig& cfg) {
  return gated_kl_penalty_with_grad(kl_smoothed, tau, entropy, cfg).value;
}

GatedPenalty gated_kl_penalty_with_grad(double kl_smoothed, double tau, double entropy,
                                        const EntropyGateConfig& cfg) {
  GatedPenalty p;
  const double gate = entropy_gate(entropy, cfg);
  if (kl_smoothed <= tau) return p;
  const double excess = kl_smoothed - tau;
  const double base = cfg.lambda_pen * excess * excess;
  p.value = base * gate;
  p.d_kl = 2.0 * cfg.lambda_pen * excess * gate;
  p.d_entropy = base * entropy_gate_derivative(entropy, cfg);
  return p;
}

double preview_scale(double kl_preview, const PreviewConfig& cfg) {
  if (!std::isfinite(kl_preview)) throw std::invalid_argument("preview_scale: non-finite preview KL");
  if (!cfg.enabled || kl_preview <= cfg.d_max) return 1.0;
  return cfg.d_max / kl_preview;
}

ControllerStep controller_step(ControllerState& state, const ControllerConfig& cfg, double d_hat,
                               double entropy, double reward) {
  if (!std::isfinite(d_hat)) throw std::invalid_argument("controller_step: non-finite KL estimate");
  ControllerStep out;
  ControllerDiagnostics& d = out.diag;

  d.kl_short_prev = state.kl.short_ema.value;
  d.kl_short_seeded = !state.kl.short_ema.initialized;
  state.kl.short_ema = ema_update(state.kl.short_ema, d_hat);
  state.kl.long_ema = ema_update(state.kl.long_ema, d_hat);

  const PidOutput pid = pid_step(state.pid, reward);
  const PhaseOutput phase = detect_phase(state.phase, reward);
  d.tau_t = adaptive_threshold(pid.output, cfg.threshold, phase.multiplier);

  d.kl_short = state.kl.short_ema.value;
  d.kl_long = state.kl.long_ema.value;
  d.gate = entropy_gate(entropy, cfg.gate);
  d.phase = phase.phase;
  d.multiplier = phase.multiplier;
  d.pid_error = pid.error;
  d.pid_output = pid.output;
  d.integral = state.pid.integral;

  out.penalty = gated_kl_penalty(d.kl_short, d.tau_t, entropy, cfg.gate);
  return out;
}

}  // namespace safe

#include "safe/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace safe {

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Ppo: return "ppo";
    case Mode::AsymKl: return "asym-kl";
    case Mode::Safe: return "safe";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::Ppo, Mode::AsymKl, Mode::Safe}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

void RunConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("config: steps must be nonnegative");
  if (batch_size < 1 || seq_len < 1) throw std::invalid_argument("config: batch_size and seq_len must be positive");
  if (ppo_epochs < 1 || grad_accumulation < 1) {
    throw std::invalid_argument("config: ppo_epochs and grad_accumulation must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be positive");
  if (!(grad_clip_policy > 0.0) || !(grad_clip_critic > 0.0)) {
    throw std::invalid_argument("config: gradient clips must be positive");
  }
  if (!(ppo_clip > 0.0 && ppo_clip < 1.0)) throw std::invalid_argument("config: ppo_clip must lie in (0, 1)");
  if (beta < 0.0) throw std::invalid_argument("config: beta must be nonnegative");
  if (!(critic.softmin_alpha > 0.0)) throw std::invalid_argument("config: softmin_alpha must be positive");
  if (!(critic.polyak_tau >= 0.0 && critic.polyak_tau <= 1.0)) {
    throw std::invalid_argument("config: polyak_tau must lie in [0, 1]");
  }
  if (!(critic.huber_delta > 0.0) || !(critic.value_clip > 0.0)) {
    throw std::invalid_argument("config: huber_delta and value_clip must be positive");
  }
  env.validate();
  asym.validate();
  controller.threshold.validate();
  controller.gate.validate();
  if (!(controller.preview.d_max > 0.0)) throw std::invalid_argument("config: preview d_max must be positive");
  if (controller.phase.half_window < 1 || controller.phase.history < controller.phase.half_window) {
    throw std::invalid_argument("config: phase history must cover at least one half window");
  }
  if (metrics.crash_window < 1 || metrics.rolling_window < 1) {
    throw std::invalid_argument("config: metric windows must be positive");
  }
  if (!(metrics.crash_drop_fraction > 0.0 && metrics.crash_drop_fraction < 1.0)) {
    throw std::invalid_argument("config: crash_drop_fraction must lie in (0, 1)");
  }
}

PolicyLoss policy_loss(const Policy& policy, const Batch& batch, const PolicyLossSpec& spec, bool with_grad) {
  PolicyLoss out;
  const Eigen::VectorXd logp_new = sequence_logp(policy, batch);
  out.l_ppo = ppo_loss(logp_new, spec.logp_old, spec.advantages, spec.ppo_clip);
  out.entropy = mean_entropy(policy, batch);
  out.kl_raw = kl_estimate(policy, batch);

  double d_kl = 0.0;
  double d_entropy = -spec.beta;

  const double short_sensitivity = spec.kl_short_seeded ? 1.0 : 1.0 - spec.kl_retention;
  out.kl_short = spec.kl_short_seeded
                     ? out.kl_raw
                     : spec.kl_retention * spec.kl_short_prev + (1.0 - spec.kl_retention) * out.kl_raw;
  out.gate = entropy_gate(out.entropy, spec.gate);
  if (spec.gated) {
    const GatedPenalty g = gated_kl_penalty_with_grad(out.kl_short, spec.tau_t, out.entropy, spec.gate);
    out.l_gated = g.value;
    d_kl += g.d_kl * short_sensitivity;
    d_entropy += g.d_entropy;
  }
  if (spec.asym) {
    const AsymEval a = asym_evaluate(out.kl_raw, spec.kl_lag, spec.asym_cfg);
    out.l_asym = a.l_asym;
    out.l_mom = a.l_mom;
    d_kl += a.derivative;
  }

  if (with_grad) {
    const Eigen::VectorXd seq_coef = ppo_loss_grad(logp_new, spec.logp_old, spec.advantages, spec.ppo_clip);
    out.grad = policy_gradient(policy, batch, seq_coef, d_kl, d_entropy);
  }
  return out;
}

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  env_ = Environment::create(cfg_.env, rng_);
  policy_ = env_.reference;
  critic_ = CriticPair(cfg_.env.feature_dim, cfg_.critic.softmin_alpha, cfg_.critic.polyak_tau);
  critic_.initialize(rng_, cfg_.critic.init_scale);
  controller_ = ControllerState(cfg_.controller, cfg_.asym.window_w);
}

TraceRecord Trainer::step() {
  const int batch = cfg_.batch_size * cfg_.grad_accumulation;
  const Rollout ro = rollout(policy_, env_, batch, cfg_.seq_len, rng_);

  TraceRecord rec;
  rec.step = step_;
  rec.completion_length = cfg_.seq_len;

  Eigen::VectorXd rewards(batch);
  double base_sum = 0.0;
  double artifact_hits = 0.0;
  for (int b = 0; b < batch; ++b) {
    const auto& tokens = ro.tokens[static_cast<std::size_t>(b)];
    rewards(b) = score(env_.reward_model, tokens, rng_);
    base_sum += base_reward(env_.reward_model, tokens);
    if (env_.reward_model.artifact_token) {
      artifact_hits += ro.batch.counts(b, *env_.reward_model.artifact_token);
    }
  }
  rec.mean_reward = rewards.mean();
  rec.base_reward = base_sum / batch;
  rec.artifact_fraction = artifact_hits / (static_cast<double>(batch) * cfg_.seq_len);

  const Eigen::VectorXd rewards_norm = normalize_rewards(reward_moments_, rewards);

  for (int b = 0; b < batch; ++b) critic_.standardizer.observe(ro.batch.contexts.row(b).transpose());
  Eigen::MatrixXd design(batch, cfg_.env.feature_dim + 1);
  Eigen::VectorXd v_soft(batch);
  Eigen::VectorXd v_old(batch);
  for (int b = 0; b < batch; ++b) {
    const Eigen::VectorXd row = critic_.design_row(ro.batch.contexts.row(b).transpose());
    design.row(b) = row.transpose();
    v_old(b) = predict_row(critic_, row, false).v_soft;
    v_soft(b) = cfg_.critic.use_target_for_advantages ? predict_row(critic_, row, true).v_soft : v_old(b);
  }
  const Advantages adv = compute_advantages(rewards_norm, v_soft);

  std::vector<KlSample> samples(ro.logp_policy.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = {ro.logp_policy[i], ro.logp_ref[i]};
  const double kl_raw = estimate_kl(samples);

  asym_controller_step(controller_.kl, kl_raw, cfg_.asym);
  const ControllerStep ctl = controller_step(controller_, cfg_.controller, kl_raw, ro.entropy, rec.mean_reward);

  rec.kl_raw = kl_raw;
  rec.kl_short = ctl.diag.kl_short;
  rec.kl_long = ctl.diag.kl_long;
  rec.tau_t = ctl.diag.tau_t;
  rec.phase = ctl.diag.phase;
  rec.gate = ctl.diag.gate;
  rec.pid_integral = ctl.diag.integral;
  rec.entropy = ro.entropy;

  PolicyLossSpec spec;
  spec.logp_old = sequence_logp(policy_, ro.batch);
  spec.advantages = adv.standardized;
  spec.ppo_clip = cfg_.ppo_clip;
  spec.beta = cfg_.beta;
  spec.gated = cfg_.gated_enabled();
  spec.kl_short_prev = ctl.diag.kl_short_prev;
  spec.kl_short_seeded = ctl.diag.kl_short_seeded;
  spec.kl_retention = controller_.kl.short_ema.retention;
  spec.tau_t = ctl.diag.tau_t;
  spec.gate = cfg_.controller.gate;
  spec.asym = cfg_.asym_enabled();
  spec.kl_lag = lagged_estimate(controller_.kl, cfg_.asym);
  spec.asym_cfg = cfg_.asym;

  const double lr = cfg_.learning_rate;
  for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
    const PolicyLoss pl = policy_loss(policy_, ro.batch, spec);
    const ValueLossResult vl = value_loss_and_grad(critic_, design, rewards_norm, v_old, cfg_.critic.huber_delta,
                                                   cfg_.critic.value_clip);
    LossParts parts;
    parts.l_ppo = pl.l_ppo;
    parts.l_value = vl.loss;
    parts.l_gated = pl.l_gated;
    parts.l_asym = pl.l_asym;
    parts.l_mom = pl.l_mom;
    parts.entropy = pl.entropy;
    parts.asym_enabled = cfg_.asym_enabled();
    const PenaltyBreakdown loss = total_loss(parts, cfg_.beta);
    if (!std::isfinite(loss.l_total) || !pl.grad.allFinite()) {
      throw std::domain_error("non-finite loss or gradient");
    }

    Eigen::MatrixXd policy_grad = pl.grad;
    clip_grad_norm(policy_grad, cfg_.grad_clip_policy);

    Eigen::VectorXd grad_a = 0.5 * vl.grad_a;
    Eigen::VectorXd grad_b = 0.5 * vl.grad_b;
    const double critic_norm = std::sqrt(grad_a.squaredNorm() + grad_b.squaredNorm());
    if (critic_norm > cfg_.grad_clip_critic) {
      const double s = cfg_.grad_clip_critic / critic_norm;
      grad_a *= s;
      grad_b *= s;
    }

    double scale = 1.0;
    if (cfg_.controller.preview.enabled) {
      const Policy tentative(policy_.weights() - lr * policy_grad);
      scale = preview_scale(kl_estimate(tentative, ro.batch), cfg_.controller.preview);
    }

    if (epoch == 0) {
      rec.value_loss = loss.l_value;
      rec.l_ppo = loss.l_ppo;
      rec.l_value = loss.l_value;
      rec.l_kl = loss.l_kl;
      rec.l_gated = loss.l_gated;
      rec.l_asym = loss.l_asym;
      rec.l_mom = loss.l_mom;
      rec.entropy_bonus = loss.entropy_bonus;
      rec.l_total = loss.l_total;
      rec.preview_scale = scale;
    }

    policy_.weights() -= (lr * scale) * policy_grad;
    critic_.online_a -= lr * grad_a;
    critic_.online_b -= lr * grad_b;
  }
  critic_ = polyak_update(std::move(critic_));
  ++step_;
  return rec;
}

StabilityReport report_from_trace(const TrainingTrace& trace, const MetricsConfig& cfg) {
  std::vector<double> rewards, kl, value;
  rewards.reserve(trace.size());
  kl.reserve(trace.size());
  value.reserve(trace.size());
  for (const TraceRecord& r : trace) {
    rewards.push_back(r.mean_reward);
    kl.push_back(r.kl_raw);
    value.push_back(r.value_loss);
  }
  return stability_report(rewards, kl, value, cfg);
}

RunResult run(const RunConfig& cfg) {
  RunResult result;
  Trainer trainer(cfg);
  result.trace.reserve(static_cast<std::size_t>(cfg.steps));
  for (int t = 0; t < cfg.steps; ++t) {
    try {
      result.trace.push_back(trainer.step());
    } catch (const std::domain_error& e) {
      result.diverged = true;
      result.failed_step = t;
      result.failure = e.what();
      break;
    }
  }
  result.report = report_from_trace(result.trace, cfg.metrics);
  return result;
}

}  // namespace safe

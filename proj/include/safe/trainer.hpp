#pragma once

// Training step orchestration over the desk-scale environment. One Trainer
// covers all three modes; they differ only in which KL penalties enter the loss.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "safe/adaptive_control.hpp"
#include "safe/critic.hpp"
#include "safe/divergence.hpp"
#include "safe/environment.hpp"
#include "safe/numerics.hpp"
#include "safe/objective.hpp"

namespace safe {

enum class Mode { Ppo, AsymKl, Safe };

std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view name);

struct RunConfig {
  Mode mode = Mode::Safe;
  int steps = 2000;
  int batch_size = 16;
  int seq_len = 24;
  std::uint64_t seed = 0;
  double learning_rate = 1e-2;
  double grad_clip_policy = 1.0;
  double grad_clip_critic = 0.5;
  int ppo_epochs = 2;
  int grad_accumulation = 1;
  double ppo_clip = 0.2;
  double beta = 0.01;

  EnvironmentConfig env;
  CriticConfig critic;
  AsymConfig asym;
  ControllerConfig controller;
  MetricsConfig metrics;

  bool asym_enabled() const { return mode != Mode::Ppo; }
  bool gated_enabled() const { return mode == Mode::Safe; }
  void validate() const;
};

struct TraceRecord {
  int step = 0;
  double mean_reward = 0.0;
  double base_reward = 0.0;        ///< reward without artifact bonus and noise
  double artifact_fraction = 0.0;  ///< share of sampled tokens equal to the artifact token
  double kl_raw = 0.0;
  double kl_short = 0.0;
  double kl_long = 0.0;
  double tau_t = 0.0;
  Phase phase = Phase::Warmup;
  double gate = 0.0;
  double pid_integral = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double l_ppo = 0.0;
  double l_value = 0.0;
  double l_kl = 0.0;
  double l_gated = 0.0;
  double l_asym = 0.0;
  double l_mom = 0.0;
  double entropy_bonus = 0.0;
  double l_total = 0.0;
  double completion_length = 0.0;
  double preview_scale = 1.0;

  bool operator==(const TraceRecord&) const = default;
};

using TrainingTrace = std::vector<TraceRecord>;

class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  /// Executes one training step and returns its trace record. Throws
  /// std::domain_error when a loss or ratio turns non-finite.
  TraceRecord step();

  int steps_done() const { return step_; }
  const RunConfig& config() const { return cfg_; }
  const Policy& policy() const { return policy_; }
  const Policy& reference() const { return env_.reference; }
  const CriticPair& critic() const { return critic_; }
  const ControllerState& controller() const { return controller_; }
  const Environment& environment() const { return env_; }

 private:
  RunConfig cfg_;
  std::mt19937_64 rng_;
  Environment env_;
  Policy policy_;
  CriticPair critic_;
  RunningMoments reward_moments_;
  ControllerState controller_;
  int step_ = 0;
};

struct RunResult {
  TrainingTrace trace;
  StabilityReport report;
  bool diverged = false;
  int failed_step = -1;
  std::string failure;
};

StabilityReport report_from_trace(const TrainingTrace& trace, const MetricsConfig& cfg);

RunResult run(const RunConfig& cfg);

// Policy-side loss terms as functions of the weights, for one epoch of one
// step. Shared by the trainer and the gradient checks.
struct PolicyLossSpec {
  Eigen::VectorXd logp_old;   ///< sequence log-likelihoods at rollout time
  Eigen::VectorXd advantages; ///< standardized
  double ppo_clip = 0.2;
  double beta = 0.0;

  bool gated = false;
  double kl_short_prev = 0.0;
  bool kl_short_seeded = false;
  double kl_retention = 0.9;
  double tau_t = 0.3;
  EntropyGateConfig gate;

  bool asym = false;
  std::optional<double> kl_lag;
  AsymConfig asym_cfg;
};

struct PolicyLoss {
  double l_ppo = 0.0;
  double l_gated = 0.0;
  double l_asym = 0.0;
  double l_mom = 0.0;
  double entropy = 0.0;
  double kl_raw = 0.0;
  double kl_short = 0.0;
  double gate = 0.5;
  /// Gradient of l_ppo + l_gated + l_asym + l_mom - beta * entropy.
  Eigen::MatrixXd grad;
};

PolicyLoss policy_loss(const Policy& policy, const Batch& batch, const PolicyLossSpec& spec, bool with_grad = true);

}  // namespace safe

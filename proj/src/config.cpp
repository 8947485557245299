#include "safe/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>

namespace safe {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["mode"] = std::string(mode_name(c.mode));
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["seq_len"] = c.seq_len;
  j["seed"] = c.seed;
  j["learning_rate"] = c.learning_rate;
  j["grad_clip_policy"] = c.grad_clip_policy;
  j["grad_clip_critic"] = c.grad_clip_critic;
  j["ppo_epochs"] = c.ppo_epochs;
  j["grad_accumulation"] = c.grad_accumulation;
  j["ppo_clip"] = c.ppo_clip;
  j["beta"] = c.beta;

  const EnvironmentConfig& e = c.env;
  j["environment"] = {{"vocab_size", e.vocab_size},         {"feature_dim", e.feature_dim},
                      {"num_contexts", e.num_contexts},     {"reference_scale", e.reference_scale},
                      {"target_support", e.target_support}, {"target_decay", e.target_decay},
                      {"artifact_token", e.artifact_token}, {"artifact_bonus", e.artifact_bonus},
                      {"noise_std", e.noise_std}};

  const CriticConfig& cr = c.critic;
  j["critic"] = {{"softmin_alpha", cr.softmin_alpha}, {"polyak_tau", cr.polyak_tau},
                 {"huber_delta", cr.huber_delta},     {"value_clip", cr.value_clip},
                 {"init_scale", cr.init_scale},       {"use_target_for_advantages", cr.use_target_for_advantages}};

  j["asymmetric_kl"] = {{"tau", c.asym.tau},
                        {"lambda_asym", c.asym.lambda_asym},
                        {"lambda_mom", c.asym.lambda_mom},
                        {"window_w", c.asym.window_w}};

  const ControllerConfig& k = c.controller;
  j["kl_ema"] = {{"short_retention", k.kl_short_retention}, {"long_retention", k.kl_long_retention}};
  j["pid"] = {{"kp", k.pid.kp},
              {"ki", k.pid.ki},
              {"kd", k.pid.kd},
              {"v_target", k.pid.v_target},
              {"reward_ema_retention", k.pid.reward_retention},
              {"integral_limit", k.pid.integral_limit}};
  j["phase"] = {{"history", k.phase.history},
                {"half_window", k.phase.half_window},
                {"climb_margin", k.phase.climb_margin},
                {"converged_std", k.phase.converged_std},
                {"converged_mean", k.phase.converged_mean},
                {"warmup_multiplier", k.phase.warmup_multiplier},
                {"climbing_multiplier", k.phase.climbing_multiplier},
                {"plateau_multiplier", k.phase.plateau_multiplier},
                {"converged_multiplier", k.phase.converged_multiplier}};
  j["threshold"] = {{"tau_base", k.threshold.tau_base},
                    {"clip_lo", k.threshold.clip_lo},
                    {"clip_hi", k.threshold.clip_hi}};
  j["entropy_gate"] = {{"h_floor", k.gate.h_floor}, {"epsilon_e", k.gate.epsilon_e}, {"lambda", k.gate.lambda_pen}};
  j["preview"] = {{"enabled", k.preview.enabled}, {"kappa_max", k.preview.d_max}};

  j["metrics"] = {{"crash_window", c.metrics.crash_window},
                  {"crash_drop_fraction", c.metrics.crash_drop_fraction},
                  {"rolling_window", c.metrics.rolling_window},
                  {"value_spike_threshold", c.metrics.value_spike_threshold}};
  return j;
}

namespace {

// Reads known keys from one JSON object and rejects anything else.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (!it->is_number_unsigned()) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: invalid value for '" + qualified(key) + "'");
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    static const json empty = json::object();
    return Reader(it == obj_.end() ? empty : *it, qualified(key));
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + qualified(item.key()) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader root(j, "");

  std::string mode = std::string(mode_name(c.mode));
  root.get("mode", mode);
  const auto parsed = parse_mode(mode);
  if (!parsed) throw ConfigError("config: unknown mode '" + mode + "' (expected ppo, asym-kl or safe)");
  c.mode = *parsed;

  root.get("steps", c.steps);
  root.get("batch_size", c.batch_size);
  root.get("seq_len", c.seq_len);
  root.get("seed", c.seed);
  root.get("learning_rate", c.learning_rate);
  root.get("grad_clip_policy", c.grad_clip_policy);
  root.get("grad_clip_critic", c.grad_clip_critic);
  root.get("ppo_epochs", c.ppo_epochs);
  root.get("grad_accumulation", c.grad_accumulation);
  root.get("ppo_clip", c.ppo_clip);
  root.get("beta", c.beta);

  {
    Reader r = root.child("environment");
    EnvironmentConfig& e = c.env;
    r.get("vocab_size", e.vocab_size);
    r.get("feature_dim", e.feature_dim);
    r.get("num_contexts", e.num_contexts);
    r.get("reference_scale", e.reference_scale);
    r.get("target_support", e.target_support);
    r.get("target_decay", e.target_decay);
    r.get("artifact_token", e.artifact_token);
    r.get("artifact_bonus", e.artifact_bonus);
    r.get("noise_std", e.noise_std);
    r.finish();
  }
  {
    Reader r = root.child("critic");
    r.get("softmin_alpha", c.critic.softmin_alpha);
    r.get("polyak_tau", c.critic.polyak_tau);
    r.get("huber_delta", c.critic.huber_delta);
    r.get("value_clip", c.critic.value_clip);
    r.get("init_scale", c.critic.init_scale);
    r.get("use_target_for_advantages", c.critic.use_target_for_advantages);
    r.finish();
  }
  {
    Reader r = root.child("asymmetric_kl");
    r.get("tau", c.asym.tau);
    r.get("lambda_asym", c.asym.lambda_asym);
    r.get("lambda_mom", c.asym.lambda_mom);
    r.get("window_w", c.asym.window_w);
    r.finish();
  }
  ControllerConfig& k = c.controller;
  {
    Reader r = root.child("kl_ema");
    r.get("short_retention", k.kl_short_retention);
    r.get("long_retention", k.kl_long_retention);
    r.finish();
  }
  {
    Reader r = root.child("pid");
    r.get("kp", k.pid.kp);
    r.get("ki", k.pid.ki);
    r.get("kd", k.pid.kd);
    r.get("v_target", k.pid.v_target);
    r.get("reward_ema_retention", k.pid.reward_retention);
    r.get("integral_limit", k.pid.integral_limit);
    r.finish();
  }
  {
    Reader r = root.child("phase");
    r.get("history", k.phase.history);
    r.get("half_window", k.phase.half_window);
    r.get("climb_margin", k.phase.climb_margin);
    r.get("converged_std", k.phase.converged_std);
    r.get("converged_mean", k.phase.converged_mean);
    r.get("warmup_multiplier", k.phase.warmup_multiplier);
    r.get("climbing_multiplier", k.phase.climbing_multiplier);
    r.get("plateau_multiplier", k.phase.plateau_multiplier);
    r.get("converged_multiplier", k.phase.converged_multiplier);
    r.finish();
  }
  {
    Reader r = root.child("threshold");
    r.get("tau_base", k.threshold.tau_base);
    r.get("clip_lo", k.threshold.clip_lo);
    r.get("clip_hi", k.threshold.clip_hi);
    r.finish();
  }
  {
    Reader r = root.child("entropy_gate");
    r.get("h_floor", k.gate.h_floor);
    r.get("epsilon_e", k.gate.epsilon_e);
    r.get("lambda", k.gate.lambda_pen);
    r.finish();
  }
  {
    Reader r = root.child("preview");
    r.get("enabled", k.preview.enabled);
    r.get("kappa_max", k.preview.d_max);
    r.finish();
  }
  {
    Reader r = root.child("metrics");
    r.get("crash_window", c.metrics.crash_window);
    r.get("crash_drop_fraction", c.metrics.crash_drop_fraction);
    r.get("rolling_window", c.metrics.rolling_window);
    r.get("value_spike_threshold", c.metrics.value_spike_threshold);
    r.finish();
  }
  root.finish();

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace safe

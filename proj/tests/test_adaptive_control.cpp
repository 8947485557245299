#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "safe/adaptive_control.hpp"

using namespace safe;

namespace {

PhaseOutput feed(PhaseState& s, const std::vector<double>& rewards) {
  PhaseOutput out;
  for (double r : rewards) out = detect_phase(s, r);
  return out;
}

std::vector<double> alternating(double mean, double half_spread, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(mean + (i % 2 == 0 ? -half_spread : half_spread));
  return v;
}

}  // namespace

TEST_CASE("pid examples") {
  PidConfig cfg;
  cfg.kp = 1.0;
  cfg.ki = 0.0;
  cfg.kd = 0.0;
  cfg.v_target = 0.001;
  cfg.reward_retention = 0.5;
  PidState s(cfg);
  const PidOutput first = pid_step(s, 0.0);
  CHECK(first.error == 0.0);
  CHECK(first.output == 0.0);
  // EMA moves by 0.5 * 0.022 = 0.011
  const PidOutput out = pid_step(s, 0.022);
  CHECK(out.error == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(out.output == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("pid under constant reward turns negative") {
  PidState s{PidConfig{}};
  PidOutput out;
  for (int i = 0; i < 500; ++i) out = pid_step(s, 0.6);
  CHECK(out.error == doctest::Approx(-0.001));
  CHECK(out.output < 0.0);
}

TEST_CASE("pid integral saturates exactly at the limit") {
  PidState s{PidConfig{}};
  double r = 0.0;
  for (int i = 0; i < 200; ++i) {
    r += 1.0;
    pid_step(s, r);
  }
  CHECK(s.integral == 1.0);
}

TEST_CASE("threshold and integral stay bounded under random rewards") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  PidState pid{PidConfig{}};
  PhaseState phase{PhaseConfig{}};
  ThresholdConfig th;
  for (int i = 0; i < 10000; ++i) {
    const double r = u(rng);
    const PidOutput o = pid_step(pid, r);
    const PhaseOutput p = detect_phase(phase, r);
    const double tau = adaptive_threshold(o.output, th, p.multiplier);
    CHECK(tau >= 0.1);
    CHECK(tau <= 0.6);
    CHECK(std::abs(pid.integral) <= 1.0);
  }
}

TEST_CASE("stagnation drives the threshold to its floor") {
  PidState pid{PidConfig{}};
  PhaseState phase{PhaseConfig{}};
  ThresholdConfig th;
  int reached = -1;
  for (int i = 0; i < 2000; ++i) {
    const PidOutput o = pid_step(pid, 0.65);
    const PhaseOutput p = detect_phase(phase, 0.65);
    const double tau = adaptive_threshold(o.output, th, p.multiplier);
    if (reached < 0 && tau == 0.1) reached = i;
    if (reached >= 0) CHECK(tau == 0.1);
  }
  CHECK(reached >= 0);
}

TEST_CASE("phase detector examples") {
  PhaseState warm{PhaseConfig{}};
  const PhaseOutput w = feed(warm, std::vector<double>(30, 0.5));
  CHECK(w.phase == Phase::Warmup);
  CHECK(w.multiplier == 1.5);

  PhaseState climb{PhaseConfig{}};
  feed(climb, std::vector<double>(50, 0.70));
  const PhaseOutput c = feed(climb, std::vector<double>(50, 0.75));
  CHECK(c.phase == Phase::Climbing);
  CHECK(c.multiplier == 1.2);

  PhaseState conv{PhaseConfig{}};
  feed(conv, std::vector<double>(50, 0.715));
  const PhaseOutput v = feed(conv, alternating(0.72, 0.01, 50));
  CHECK(v.phase == Phase::Converged);
  CHECK(v.multiplier == 1.0);

  PhaseState plat{PhaseConfig{}};
  feed(plat, std::vector<double>(50, 0.50));
  const PhaseOutput p = feed(plat, alternating(0.50, 0.05, 50));
  CHECK(p.phase == Phase::Plateau);
  CHECK(p.multiplier == 0.8);
}

TEST_CASE("phase names round trip") {
  for (Phase p : {Phase::Warmup, Phase::Climbing, Phase::Plateau, Phase::Converged}) {
    CHECK(parse_phase(phase_name(p)) == p);
  }
  CHECK_FALSE(parse_phase("bogus"));
}

TEST_CASE("adaptive threshold examples") {
  ThresholdConfig th;
  CHECK(adaptive_threshold(0.0, th, 1.0) == doctest::Approx(0.3));
  CHECK(adaptive_threshold(10.0, th, 1.0) == 0.6);
  CHECK(adaptive_threshold(-10.0, th, 1.0) == 0.1);
}

TEST_CASE("entropy gate examples") {
  EntropyGateConfig g;
  CHECK(entropy_gate(4.0, g) == 0.5);
  CHECK(entropy_gate(1.0, g) == doctest::Approx(2.0 / 1.1));
  CHECK(entropy_gate(0.0, g) == doctest::Approx(20.0));
  CHECK_THROWS(entropy_gate(-0.1, g));
}

TEST_CASE("entropy gate is floored and nonincreasing") {
  EntropyGateConfig g;
  double prev = entropy_gate(0.0, g);
  for (int i = 0; i <= 100; ++i) {
    const double h = 0.06 * i;
    const double v = entropy_gate(h, g);
    CHECK(v >= 0.5);
    CHECK(v <= prev);
    CHECK(gated_kl_penalty(0.8, 0.2, h, g) <= gated_kl_penalty(0.8, 0.2, std::max(0.0, h - 0.06), g));
    prev = v;
  }
}

TEST_CASE("gated penalty examples") {
  EntropyGateConfig g;
  CHECK(gated_kl_penalty(0.2, 0.3, 1.0, g) == 0.0);
  CHECK(gated_kl_penalty(0.3, 0.3, 1.0, g) == 0.0);
  CHECK(gated_kl_penalty(0.5, 0.3, 4.0, g) == doctest::Approx(0.02));
  CHECK(gated_kl_penalty(0.5, 0.3, 1.0, g) == doctest::Approx(0.04 * 2.0 / 1.1));
}

TEST_CASE("gated penalty partials match finite differences") {
  EntropyGateConfig g;
  const double h = 1e-6;
  for (double kl : {0.35, 0.8, 1.7}) {
    for (double ent : {0.2, 1.0, 2.5, 3.5}) {
      const GatedPenalty p = gated_kl_penalty_with_grad(kl, 0.3, ent, g);
      const double dk = (gated_kl_penalty(kl + h, 0.3, ent, g) - gated_kl_penalty(kl - h, 0.3, ent, g)) / (2 * h);
      const double de = (gated_kl_penalty(kl, 0.3, ent + h, g) - gated_kl_penalty(kl, 0.3, ent - h, g)) / (2 * h);
      CHECK(p.d_kl == doctest::Approx(dk).epsilon(1e-6));
      CHECK(p.d_entropy == doctest::Approx(de).epsilon(1e-6));
    }
  }
}

TEST_CASE("preview scale examples") {
  PreviewConfig on{0.5, true};
  CHECK(preview_scale(0.3, on) == 1.0);
  CHECK(preview_scale(1.0, on) == doctest::Approx(0.5));
  PreviewConfig off{0.5, false};
  for (double kl : {0.0, 0.7, 10.0}) CHECK(preview_scale(kl, off) == 1.0);
}

TEST_CASE("controller first step") {
  ControllerConfig cfg;
  ControllerState s(cfg, 10);
  const ControllerStep out = controller_step(s, cfg, 0.0, 5.0, 0.5);
  CHECK(out.penalty == 0.0);
  CHECK(out.diag.phase == Phase::Warmup);
  CHECK(out.diag.tau_t == doctest::Approx(std::clamp(0.3 * 1.5, 0.1, 0.6)));
}

TEST_CASE("controller is a pure function of its state") {
  ControllerConfig cfg;
  ControllerState a(cfg, 10);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.4, 0.3);
  for (int i = 0; i < 150; ++i) controller_step(a, cfg, n(rng), 2.0, 0.5 + 0.1 * n(rng));
  ControllerState b = a;
  for (int i = 0; i < 20; ++i) {
    const double d = n(rng), r = n(rng);
    const ControllerStep x = controller_step(a, cfg, d, 1.5, r);
    const ControllerStep y = controller_step(b, cfg, d, 1.5, r);
    CHECK(x.penalty == y.penalty);
    CHECK(x.diag.tau_t == y.diag.tau_t);
  }
}

TEST_CASE("sustained KL above a pinned threshold") {
  ControllerConfig cfg;
  ControllerState s(cfg, 10);
  ControllerStep out;
  const double entropy = 1.2;
  for (int i = 0; i < 3000; ++i) out = controller_step(s, cfg, 0.55, entropy, 0.6);
  CHECK(out.diag.tau_t == 0.1);
  CHECK(out.diag.kl_short == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(out.penalty == doctest::Approx(cfg.gate.lambda_pen * 0.2025 * entropy_gate(entropy, cfg.gate)).epsilon(1e-10));
}

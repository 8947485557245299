#include <doctest.h>

#include <cmath>
#include <sstream>

#include "safe/config.hpp"
#include "safe/trace_io.hpp"
#include "safe/trainer.hpp"

using namespace safe;

namespace {

RunConfig short_config(Mode mode, int steps, std::uint64_t seed) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.steps = steps;
  cfg.seed = seed;
  return cfg;
}

std::string serialize(const RunConfig& cfg, const RunResult& r) {
  std::ostringstream out;
  write_trace(out, TraceFile{make_metadata(cfg, r), r.trace});
  return out.str();
}

}  // namespace

TEST_CASE("zero steps give an empty trace and a zero report") {
  const RunResult r = run(short_config(Mode::Safe, 0, 1));
  CHECK(r.trace.empty());
  CHECK_FALSE(r.diverged);
  CHECK(r.report.mean_reward == 0.0);
  CHECK(r.report.crash_count == 0);
  CHECK(r.report.kl_rolling_std == 0.0);
}

TEST_CASE("identical seed and config reproduce the trace") {
  for (Mode m : {Mode::Ppo, Mode::AsymKl, Mode::Safe}) {
    const RunConfig cfg = short_config(m, 60, 11);
    CHECK(serialize(cfg, run(cfg)) == serialize(cfg, run(cfg)));
  }
  const RunConfig a = short_config(Mode::Safe, 30, 1);
  const RunConfig b = short_config(Mode::Safe, 30, 2);
  CHECK(run(a).trace != run(b).trace);
}

TEST_CASE("the reference policy never moves") {
  Trainer t(short_config(Mode::Safe, 100, 4));
  const Eigen::MatrixXd before = t.reference().weights();
  for (int i = 0; i < 100; ++i) t.step();
  CHECK(t.reference().weights() == before);
  CHECK(t.policy().weights() != before);
  CHECK(t.steps_done() == 100);
}

TEST_CASE("logged components sum to the total") {
  const RunConfig cfg = short_config(Mode::Safe, 200, 3);
  const RunResult r = run(cfg);
  REQUIRE(r.trace.size() == 200);
  for (const TraceRecord& rec : r.trace) {
    const double recomputed = rec.l_ppo + 0.5 * rec.l_value + rec.l_kl - rec.entropy_bonus;
    CHECK(std::abs(rec.l_total - recomputed) <= 1e-12);
    CHECK(rec.entropy_bonus == doctest::Approx(cfg.beta * rec.entropy).epsilon(1e-10));
    CHECK(rec.l_kl == doctest::Approx(rec.l_gated + rec.l_asym + rec.l_mom).epsilon(1e-14));
  }
}

TEST_CASE("ppo mode logs no asymmetric or gated terms") {
  const RunResult r = run(short_config(Mode::Ppo, 80, 5));
  for (const TraceRecord& rec : r.trace) {
    CHECK(rec.l_gated == 0.0);
    CHECK(rec.l_kl == 0.0);
  }
}

TEST_CASE("entropy stays within its bounds and losses stay finite") {
  const RunConfig cfg = short_config(Mode::Safe, 300, 8);
  const RunResult r = run(cfg);
  CHECK_FALSE(r.diverged);
  const double h_max = std::log(static_cast<double>(cfg.env.vocab_size));
  for (const TraceRecord& rec : r.trace) {
    CHECK(rec.entropy >= 0.0);
    CHECK(rec.entropy <= h_max + 1e-12);
    CHECK(std::isfinite(rec.l_total));
    CHECK(rec.tau_t >= 0.1);
    CHECK(rec.tau_t <= 0.6);
    CHECK(rec.gate >= 0.5);
    CHECK(rec.artifact_fraction >= 0.0);
    CHECK(rec.artifact_fraction <= 1.0);
  }
}

TEST_CASE("zero penalties, gains and entropy bonus collapse safe onto ppo") {
  RunConfig base = short_config(Mode::Ppo, 150, 21);
  base.beta = 0.0;
  base.asym.lambda_asym = 0.0;
  base.asym.lambda_mom = 0.0;
  base.controller.gate.lambda_pen = 0.0;
  base.controller.pid.kp = 0.0;
  base.controller.pid.ki = 0.0;
  base.controller.pid.kd = 0.0;
  base.controller.preview.enabled = false;
  RunConfig safe_cfg = base;
  safe_cfg.mode = Mode::Safe;
  const RunResult a = run(base), b = run(safe_cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(std::abs(a.trace[i].l_total - b.trace[i].l_total) <= 1e-12);
    CHECK(std::abs(a.trace[i].l_ppo - b.trace[i].l_ppo) <= 1e-12);
    CHECK(std::abs(a.trace[i].l_value - b.trace[i].l_value) <= 1e-12);
    CHECK(b.trace[i].l_kl == 0.0);
  }
}

TEST_CASE("gradient accumulation is equivalent to a larger batch") {
  RunConfig one = short_config(Mode::Safe, 40, 6);
  one.batch_size = 16;
  RunConfig two = one;
  two.batch_size = 8;
  two.grad_accumulation = 2;
  CHECK(run(one).trace == run(two).trace);
}

TEST_CASE("invalid configurations are rejected at construction") {
  RunConfig cfg;
  cfg.ppo_epochs = 0;
  CHECK_THROWS_AS(Trainer{cfg}, std::invalid_argument);
  cfg = RunConfig{};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(Trainer{cfg}, std::invalid_argument);
}

TEST_CASE("the stability report matches a recomputation from the trace") {
  const RunConfig cfg = short_config(Mode::AsymKl, 120, 9);
  const RunResult r = run(cfg);
  const StabilityReport again = report_from_trace(r.trace, cfg.metrics);
  CHECK(again.mean_reward == r.report.mean_reward);
  CHECK(again.crash_count == r.report.crash_count);
  CHECK(again.kl_rolling_std == r.report.kl_rolling_std);
}

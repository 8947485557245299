#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "safe/environment.hpp"
#include "safe/trainer.hpp"

using namespace safe;

namespace {

double policy_objective(const Policy& p, const testing::GradientInstance& g) {
  const PolicyLoss l = policy_loss(p, g.rollout.batch, g.spec, false);
  return l.l_ppo + l.l_gated + l.l_asym + l.l_mom - g.spec.beta * l.entropy;
}

Eigen::MatrixXd finite_difference(const testing::GradientInstance& g, double h) {
  Eigen::MatrixXd fd(g.policy.vocab_size(), g.policy.feature_dim());
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    Policy p = g.policy, m = g.policy;
    p.weights().data()[i] += h;
    m.weights().data()[i] -= h;
    fd.data()[i] = (policy_objective(p, g) - policy_objective(m, g)) / (2 * h);
  }
  return fd;
}

}  // namespace

TEST_CASE("probabilities are normalized and entropy is bounded") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd w(32, 16);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 3.0 * n(rng);
    const Policy p(w);
    Eigen::VectorXd x(16);
    for (int f = 0; f < 16; ++f) x(f) = n(rng);
    CHECK(std::abs(p.probabilities(x).sum() - 1.0) < 1e-12);
    const double h = p.entropy(x);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(32.0) + 1e-12);
  }
}

TEST_CASE("rollout entropy examples") {
  std::mt19937_64 rng(2);
  const Policy uniform(10, 3);
  Eigen::MatrixXd contexts = Eigen::MatrixXd::Ones(1, 3);
  const std::vector<int> ids(4, 0);
  const Rollout u = rollout_contexts(uniform, uniform, contexts, ids, 8, rng);
  CHECK(u.entropy == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(10, 3);
  w.row(4).setConstant(400.0);
  const Policy onehot(w);
  const Rollout o = rollout_contexts(onehot, uniform, contexts, ids, 8, rng);
  CHECK(o.entropy == doctest::Approx(0.0));
  for (const auto& seq : o.tokens) {
    for (int t : seq) CHECK(t == 4);
  }
  for (double lp : o.logp_policy) CHECK(lp == doctest::Approx(0.0));
}

TEST_CASE("on-reference rollouts give a zero-mean KL estimate") {
  std::mt19937_64 rng(3);
  EnvironmentConfig cfg;
  const Environment env = Environment::create(cfg, rng);
  const Rollout r = rollout(env.reference, env, 400, 25, rng);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < r.logp_policy.size(); ++i) ratios.push_back(r.logp_policy[i] - r.logp_ref[i]);
  CHECK(ratios.size() == 10000);
  for (double x : ratios) CHECK(x == 0.0);
}

TEST_CASE("score examples") {
  SyntheticRewardModel m;
  m.target_distribution = Eigen::VectorXd::Zero(4);
  m.target_distribution << 0.5, 0.25, 0.25, 0.0;
  std::mt19937_64 rng(5);
  CHECK(score(m, std::vector<int>{0, 0, 1, 2}, rng) == doctest::Approx(1.0));
  CHECK(score(m, std::vector<int>{3, 3, 3}, rng) == doctest::Approx(0.0));

  m.artifact_token = 0;
  m.artifact_bonus = 0.5;
  const double base = base_reward(m, std::vector<int>{0, 0, 0, 0});
  CHECK(base == doctest::Approx(0.5));
  CHECK(score(m, std::vector<int>{0, 0, 0, 0}, rng) == doctest::Approx(base + 0.5));
}

TEST_CASE("reward without artifact or noise is a function of the empirical distribution") {
  SyntheticRewardModel m;
  m.target_distribution = geometric_target(8, 4, 0.7);
  std::mt19937_64 a(1), b(99);
  const std::vector<int> t1 = {0, 1, 2, 0, 5};
  const std::vector<int> t2 = {5, 0, 0, 2, 1};
  CHECK(score(m, t1, a) == score(m, t2, b));
}

TEST_CASE("zero advantages and penalties give a zero gradient") {
  testing::GradientInstance g = testing::make_instance(7, 8, 4, 6, 5);
  g.spec.advantages.setZero();
  g.spec.beta = 0.0;
  const PolicyLoss l = policy_loss(g.policy, g.rollout.batch, g.spec);
  CHECK(l.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("policy loss gradient matches finite differences on a 10-token instance") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testing::GradientInstance g = testing::make_instance(seed, 10, 10, 8, 6);
    g.spec.beta = 0.01;
    g.spec.gated = true;
    g.spec.tau_t = 0.0;
    g.spec.kl_short_prev = 0.1;
    g.spec.asym = true;
    g.spec.asym_cfg.tau = -1.0;
    g.spec.kl_lag = -0.5;
    const PolicyLoss l = policy_loss(g.policy, g.rollout.batch, g.spec);
    CHECK(l.l_gated > 0.0);
    CHECK(l.l_asym > 0.0);
    const Eigen::MatrixXd fd = finite_difference(g, 1e-5);
    const double rel = (l.grad - fd).norm() / std::max(1e-12, fd.norm());
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("KL estimate equals the sampled log-ratio mean at the sampling policy") {
  const testing::GradientInstance g = testing::make_instance(3, 8, 4, 6, 5);
  const Rollout& r = g.rollout;
  double manual = 0.0;
  for (std::size_t i = 0; i < r.logp_policy.size(); ++i) manual += r.logp_policy[i] - r.logp_ref[i];
  manual /= static_cast<double>(r.logp_policy.size());
  CHECK(kl_estimate(g.behavior, r.batch) == doctest::Approx(manual).epsilon(1e-12));
  CHECK(kl_estimate(g.policy, r.batch) != doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("gradient clipping rescales to exactly the clip norm") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(3, 4, 2.0);
  const double before = clip_grad_norm(g, 1.0);
  CHECK(before == doctest::Approx(std::sqrt(12.0) * 2.0));
  CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::MatrixXd small = Eigen::MatrixXd::Constant(2, 2, 0.1);
  const Eigen::MatrixXd copy = small;
  clip_grad_norm(small, 1.0);
  CHECK(small == copy);
}

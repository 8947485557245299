#pragma once

// Random small policy instances shared by the gradient checks.

#include <random>
#include <vector>

#include "safe/environment.hpp"
#include "safe/objective.hpp"
#include "safe/trainer.hpp"

namespace safe::testing {

struct GradientInstance {
  Policy policy;
  Policy behavior;
  Policy reference;
  Rollout rollout;
  PolicyLossSpec spec;
};

/// A rollout from a perturbed copy of the policy, so ratios and the KL
/// estimate are away from their trivial values.
inline GradientInstance make_instance(std::uint64_t seed, int vocab, int features, int batch, int seq_len) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  auto random_matrix = [&](double scale) {
    Eigen::MatrixXd m(vocab, features);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * n(rng);
    return m;
  };
  GradientInstance g;
  g.reference = Policy(random_matrix(0.3));
  g.behavior = Policy(g.reference.weights() + random_matrix(0.3));
  g.policy = Policy(g.behavior.weights() + random_matrix(0.05));

  Eigen::MatrixXd contexts(4, features);
  for (Eigen::Index i = 0; i < contexts.size(); ++i) contexts.data()[i] = n(rng);
  std::vector<int> ids(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) ids[static_cast<std::size_t>(b)] = b % 4;
  g.rollout = rollout_contexts(g.behavior, g.reference, contexts, ids, seq_len, rng);

  g.spec.logp_old = sequence_logp(g.behavior, g.rollout.batch);
  Eigen::VectorXd raw(batch);
  for (int b = 0; b < batch; ++b) raw(b) = n(rng);
  g.spec.advantages = standardize(raw);
  g.spec.ppo_clip = 0.2;
  return g;
}

}  // namespace safe::testing

#pragma once

// Oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qaoaml/mlp.hpp"
#include "qaoaml/rl.hpp"

namespace qaoaml::oracle {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

/// Asymptotic two-sample KS critical value at alpha = 0.01.
inline double ks_critical_001(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(double(n + m) / double(n * m));
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / scale;
}

/// Random batch whose old log-probabilities come from `actor` itself, so
/// every ratio starts at 1 and no sample sits on a clipping kink.
inline PpoBatch random_batch(const Mlp& actor, double variance, int n, Rng& rng) {
  PpoBatch b;
  const int in = actor.input_dim();
  b.states.resize(in, n);
  for (Eigen::Index i = 0; i < b.states.size(); ++i) b.states.data()[i] = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd mu = actor.forward(b.states);
  b.actions = mu;
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions.data()[i] += std::sqrt(variance) * rng.normal();
  b.log_probs_old = batch_log_probs(b.actions, mu, variance);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (int i = 0; i < n; ++i) b.advantages[i] = rng.normal(), b.returns[i] = rng.normal();
  return b;
}

/// Worst relative error between backprop and central differences over
/// `probes` randomly chosen parameters of the actor surrogate and the critic loss.
inline double gradient_check(std::uint64_t seed, int probes, int depth = 1) {
  Rng rng(seed);
  PolicyBundle pb = make_policy(depth, seed);
  // Larger output weights than the default init so the check is not trivially small.
  pb.actor.weights().back() *= 20.0;
  const double var = kNoiseVariance;
  const PpoBatch batch = random_batch(pb.actor, var, 16, rng);
  MlpGrad ga, gc;
  actor_objective(pb.actor, batch, var, 0.2, &ga);
  critic_loss(pb.critic, batch, &gc);
  double worst = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < probes; ++t) {
    {
      const std::size_t k = rng.below(pb.actor.parameter_count());
      double& w = pb.actor.parameter(k);
      const double w0 = w;
      w = w0 + h;
      const double up = actor_objective(pb.actor, batch, var, 0.2);
      w = w0 - h;
      const double dn = actor_objective(pb.actor, batch, var, 0.2);
      w = w0;
      worst = std::max(worst, relative_error(grad_entry(ga, k), (up - dn) / (2 * h)));
    }
    {
      const std::size_t k = rng.below(pb.critic.parameter_count());
      double& w = pb.critic.parameter(k);
      const double w0 = w;
      w = w0 + h;
      const double up = critic_loss(pb.critic, batch);
      w = w0 - h;
      const double dn = critic_loss(pb.critic, batch);
      w = w0;
      worst = std::max(worst, relative_error(grad_entry(gc, k), (up - dn) / (2 * h)));
    }
  }
  return worst;
}

/// One-step bandit with reward -|a - target| on a constant state. Returns the
/// policy mean after each update.
inline std::vector<double> run_bandit(std::uint64_t seed, int updates, double target = 0.05,
                                      double noise_std = 0.01, int batch = 64) {
  Rng rng(seed);
  Rng init = rng.substream("init");
  PpoConfig cfg;
  PpoLearner learner(PolicyBundle::create(1, 1, init, noise_std * noise_std), cfg);
  const std::vector<double> state{1.0};
  std::vector<double> means;
  for (int u = 0; u < updates; ++u) {
    std::vector<Trajectory> trajs(batch);
    for (auto& t : trajs) {
      const SampledAction a = sample_action(learner.bundle, state, rng);
      t.states = {state};
      t.actions = {a.raw};
      t.log_probs = {a.log_prob};
      t.rewards = {-std::abs(a.step[0] - target)};
      t.values = {policy_forward(learner.bundle, state).value};
      t.bootstrap_value = 0.0;
    }
    ppo_update(learner, trajs, cfg);
    means.push_back(policy_forward(learner.bundle, state).mean[0]);
  }
  return means;
}

}  // namespace qaoaml::oracle

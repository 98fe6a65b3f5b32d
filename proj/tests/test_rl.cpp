#include <gtest/gtest.h>

#include <numbers>

#include "qaoaml/rl.hpp"
#include "support.hpp"

using namespace qaoaml;

namespace {

const Graph kK2(2, {{0, 1}});

std::vector<Trajectory> rollouts(const PolicyBundle& b, const Graph& g, int episodes, std::uint64_t seed) {
  PpoConfig cfg;
  cfg.episode_length = 16;
  auto diag = std::make_shared<const CutDiagonal>(cut_diagonal(g));
  std::vector<Trajectory> out;
  for (int e = 0; e < episodes; ++e)
    out.push_back(collect_episode(b, diag, g.edge_count(), 1.0, cfg, EvalMode::exact(),
                                  Rng(seed).substream("ep", e)));
  return out;
}

}  // namespace

TEST(Env, ResetGivesZeroHistory) {
  MeteredObjective obj(gen_ladder(3), 1, EvalMode::exact(), 10);
  const EnvState s = env_reset(obj, 5);
  const auto f = s.features();
  EXPECT_EQ(f.size(), 12u);
  EXPECT_EQ(state_dimension(1), 12);
  EXPECT_EQ(state_dimension(2), 20);
  for (double v : f) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(obj.used(), 1u);
  MeteredObjective obj2(gen_ladder(3), 1, EvalMode::exact(), 10);
  EXPECT_EQ(env_reset(obj2, 5).current, s.current);
  MeteredObjective spent(gen_ladder(3), 1, EvalMode::exact(), 0);
  EXPECT_THROW(env_reset(spent, 5), BudgetError);
}

TEST(Env, StepRewardsAndHistory) {
  MeteredObjective obj(gen_ladder(3), 1, EvalMode::exact(), 10);
  EnvState s = env_reset_at(obj, QaoaParams({0.2}, {0.3}), 2.0);
  StepResult zero = env_step(s, {0.0, 0.0}, obj);
  EXPECT_EQ(zero.reward, 0.0);
  StepResult r = env_step(zero.state, {0.05, -0.1}, obj);
  EXPECT_NEAR(r.reward, (r.state.current_f - zero.state.current_f) / 2.0, 1e-15);
  const auto f = r.state.features();
  // Newest record compares against the previous iterate.
  EXPECT_NEAR(f[0], r.reward, 1e-15);
  EXPECT_NEAR(f[1], 0.05, 1e-12);
  EXPECT_NEAR(f[2], -0.1, 1e-12);
  // Second record compares against the start.
  EXPECT_NEAR(f[3], (r.state.current_f - s.current_f) / 2.0, 1e-15);
  for (std::size_t k = 6; k < f.size(); ++k) EXPECT_EQ(f[k], 0.0);
  EXPECT_THROW(env_step(s, {0.1}, obj), DomainError);
}

TEST(Env, HistoryKeepsFourRecords) {
  MeteredObjective obj(gen_ladder(3), 2, EvalMode::exact(), 20);
  EnvState s = env_reset_at(obj, QaoaParams::zeros(2));
  for (int k = 0; k < 7; ++k) s = env_step(s, {0.01, 0.02, 0.03, 0.04}, obj).state;
  EXPECT_EQ(s.history.size(), 4u);
  EXPECT_EQ(s.features().size(), 20u);
}

TEST(Env, StepWrapsParameters) {
  MeteredObjective obj(gen_ladder(3), 1, EvalMode::exact(), 3);
  const double pi = std::numbers::pi;
  EnvState s = env_reset_at(obj, QaoaParams({pi - 0.02}, {0.0}));
  const StepResult r = env_step(s, {0.05, 0.0}, obj);
  EXPECT_NEAR(r.state.current.betas()[0], -pi + 0.03, 1e-12);
  EXPECT_NEAR(r.state.features()[1], 0.05, 1e-12);
}

TEST(Env, EmptyGraphNeverRewards) {
  MeteredObjective obj(Graph(3, {}), 1, EvalMode::exact(), 10);
  EnvState s = env_reset(obj, 1);
  for (int k = 0; k < 5; ++k) {
    StepResult r = env_step(s, {0.1, -0.1}, obj);
    EXPECT_EQ(r.reward, 0.0);
    s = r.state;
  }
}

TEST(Env, ClimbingTowardOptimumIsRewarded) {
  // K2 at p = 1: f = 1/2 + sin(4b) sin(g)/2, maximal at (pi/8, pi/2).
  MeteredObjective obj(kK2, 1, EvalMode::exact(), 3);
  EnvState s = env_reset_at(obj, QaoaParams({0.2}, {1.2}));
  EXPECT_GT(env_step(s, {0.1, 0.1}, obj).reward, 0.0);
}

TEST(Env, RewardsTelescope) {
  const Graph g = gen_barbell(4);
  MeteredObjective obj(g, 2, EvalMode::exact(), 65);
  EnvState s = env_reset(obj, 3, 3.5);
  const double f0 = s.current_f;
  Rng rng(8);
  double total = 0.0;
  for (int k = 0; k < 64; ++k) {
    std::vector<double> a(4);
    for (double& x : a) x = rng.uniform(-0.1, 0.1);
    StepResult r = env_step(s, a, obj);
    total += r.reward;
    s = r.state;
  }
  EXPECT_NEAR(total, (s.current_f - f0) / 3.5, 1e-9);
}

TEST(Normalizer, Examples) {
  const double k2 = reward_normalizer(kK2, 1, 500, 1);
  EXPECT_NEAR(k2, 0.5, 0.05);
  EXPECT_EQ(reward_normalizer(Graph(3, {}), 1, 500, 1), 1.0);
  const Graph g = gen_ladder(4);
  const double a = reward_normalizer(g, 1, 500, 2), b = reward_normalizer(g, 1, 1000, 2);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(std::abs(a - b) / b, 0.05);
  EXPECT_THROW(reward_normalizer(g, 1, 0, 2), DomainError);
}

TEST(Policy, ZeroWeightsAndBounds) {
  PolicyBundle b = make_policy(1, 4);
  EXPECT_EQ(b.input_dim(), 12);
  EXPECT_EQ(b.action_dim(), 2);
  for (auto& w : b.actor.weights()) w.setZero();
  for (auto& w : b.critic.weights()) w.setZero();
  const PolicyOutput z = policy_forward(b, std::vector<double>(12, 0.7));
  EXPECT_EQ(z.mean, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(z.value, 0.0);

  PolicyBundle big = make_policy(2, 5);
  big.actor.weights().back() *= 1000.0;
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> st(20);
    for (double& v : st) v = rng.uniform(-5, 5);
    for (double m : policy_forward(big, st).mean) EXPECT_LE(std::abs(m), kActionBound);
    for (double a : sample_action(big, st, rng).step) EXPECT_LE(std::abs(a), kActionBound);
  }
  EXPECT_THROW(policy_forward(b, std::vector<double>(5, 0.0)), DomainError);
}

TEST(Policy, GaussianHead) {
  const PolicyBundle b = make_policy(2, 6);
  const std::vector<double> st(20, 0.1);
  const auto mean = policy_forward(b, st).mean;
  EXPECT_NEAR(gaussian_log_prob(mean, mean, kNoiseVariance),
              -(4.0 / 2.0) * std::log(2 * std::numbers::pi * kNoiseVariance), 1e-12);

  Rng rng(9);
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const double d = sample_action(b, st, rng).raw[0] - mean[0];
    sum += d, sq += d * d;
  }
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, std::exp(-3.0), 0.002);

  PolicyBundle quiet = b;
  quiet.noise_variance = 0.0;
  EXPECT_EQ(sample_action(quiet, st, rng).step, mean);
}

TEST(Ppo, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_LE(oracle::gradient_check(seed, 300, seed == 3 ? 2 : 1), 1e-4);
}

TEST(Ppo, RatioIdentityAndUnclippedObjective) {
  const PolicyBundle b = make_policy(1, 7);
  const auto trajs = rollouts(b, gen_ladder(3), 4, 1);
  PpoConfig cfg;
  const PpoBatch batch = make_batch(trajs, cfg);
  const Eigen::VectorXd logp = batch_log_probs(batch.actions, b.actor.forward(batch.states), b.noise_variance);
  for (Eigen::Index i = 0; i < logp.size(); ++i) EXPECT_NEAR(std::exp(logp[i] - batch.log_probs_old[i]), 1.0, 1e-12);
  double clip_frac = 1.0;
  const double obj = actor_objective(b.actor, batch, b.noise_variance, 0.2, nullptr, &clip_frac);
  EXPECT_NEAR(obj, batch.advantages.mean(), 1e-12);
  EXPECT_EQ(clip_frac, 0.0);
}

TEST(Ppo, BatchAdvantagesAreNormalized) {
  const auto trajs = rollouts(make_policy(1, 8), gen_barbell(3), 3, 2);
  const PpoBatch batch = make_batch(trajs, PpoConfig{});
  EXPECT_EQ(batch.states.cols(), 48);
  EXPECT_NEAR(batch.advantages.mean(), 0.0, 1e-12);
  EXPECT_NEAR(batch.advantages.squaredNorm() / 48.0, 1.0, 1e-9);
  EXPECT_THROW(make_batch({}, PpoConfig{}), DomainError);
}

TEST(Ppo, ReturnsAndGaeByHand) {
  Trajectory t;
  t.states = {{0.0}, {0.0}};
  t.actions = {{0.0}, {0.0}};
  t.log_probs = {0.0, 0.0};
  t.rewards = {1.0, 2.0};
  t.values = {0.5, 0.25};
  t.bootstrap_value = 4.0;
  PpoConfig cfg;
  cfg.discount = 0.9;
  cfg.gae_lambda = 0.5;
  const PpoBatch b = make_batch({t}, cfg);
  EXPECT_NEAR(b.returns[1], 2.0 + 0.9 * 4.0, 1e-12);
  EXPECT_NEAR(b.returns[0], 1.0 + 0.9 * (2.0 + 0.9 * 4.0), 1e-12);
  const double d1 = 2.0 + 0.9 * 4.0 - 0.25;
  const double d0 = 1.0 + 0.9 * 0.25 - 0.5;
  const double a1 = d1, a0 = d0 + 0.9 * 0.5 * d1;
  // Normalized: only the sign of the difference survives for two samples.
  EXPECT_EQ(b.advantages[0] > b.advantages[1], a0 > a1);
}

TEST(Ppo, ZeroAdvantagesLeaveActorUnchanged) {
  const PolicyBundle b = make_policy(1, 9);
  PpoBatch batch = make_batch(rollouts(b, gen_ladder(3), 2, 3), PpoConfig{});
  batch.advantages.setZero();
  MlpGrad g;
  EXPECT_EQ(actor_objective(b.actor, batch, b.noise_variance, 0.2, &g), 0.0);
  Mlp actor = b.actor;
  Adam opt(actor, 3e-4);
  opt.step(actor, g);
  EXPECT_TRUE(actor == b.actor);
}

TEST(Ppo, KlEarlyStopOvershootsByAtMostOnePass) {
  PpoConfig cfg;
  cfg.kl_stop = 0.001;
  cfg.actor_lr = 1e-2;
  const PolicyBundle b = make_policy(1, 10);
  const auto trajs = rollouts(b, gen_barbell(4), 4, 4);
  const auto [after, diag] = ppo_update(b, trajs, cfg);
  ASSERT_TRUE(diag.early_stopped);
  ASSERT_GE(diag.actor_passes, 1);
  EXPECT_GT(diag.mean_kl, 0.0);
  // Replaying one pass fewer lands at or under the threshold.
  PpoConfig shorter = cfg;
  shorter.max_passes = diag.actor_passes - 1;
  if (shorter.max_passes >= 1) {
    const auto [prev, d2] = ppo_update(b, trajs, shorter);
    EXPECT_LE(d2.mean_kl, cfg.kl_stop);
  }
}

TEST(Ppo, BanditConverges) {
  const auto means = oracle::run_bandit(1, 200);
  EXPECT_NEAR(means.back(), 0.05, 0.01);
}

TEST(Ppo, CriticLossDecreases) {
  const PolicyBundle b = make_policy(1, 11);
  const auto [after, diag] = ppo_update(b, rollouts(b, gen_ladder(4), 4, 5), PpoConfig{});
  EXPECT_LT(diag.value_loss_after, diag.value_loss_before);
}

TEST(Train, DeterministicAndShaped) {
  PpoConfig cfg = PpoConfig::desk();
  cfg.epochs = 3;
  cfg.episodes_per_epoch = 4;
  cfg.episode_length = 16;
  cfg.reward_probes = 50;
  const Suite suite = build_train_set();
  const TrainResult a = train(suite, 1, cfg, 21);
  const TrainResult b = train(suite, 1, cfg, 21, EvalMode::exact(), 2);
  EXPECT_EQ(a.learning_curve.size(), 3u);
  EXPECT_EQ(a.normalizers.size(), 7u);
  EXPECT_EQ(a.learning_curve, b.learning_curve);
  EXPECT_TRUE(a.bundle.actor == b.bundle.actor);
  const TrainResult c = train(suite, 1, cfg, 22);
  EXPECT_NE(a.learning_curve, c.learning_curve);
  EXPECT_THROW(train({}, 1, cfg, 1), DomainError);
}

TEST(RlOptimize, BudgetSplit) {
  const PolicyBundle b = make_policy(1, 12);
  MeteredObjective obj(gen_ladder(4), 1, EvalMode::sampled(256, 1), 192);
  const OptResult r = rl_optimize(obj, b, 3);
  EXPECT_LE(r.evals_used, 192u);
  EXPECT_EQ(obj.trace().size(), r.evals_used);
  // Phase 1 ends after exactly B/2 evaluations: the next is Nelder-Mead's first
  // vertex, which re-evaluates the phase-1 best.
  double best = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < 96; ++i)
    if (obj.trace()[i].value.mean > best) best = obj.trace()[i].value.mean, best_i = i;
  EXPECT_EQ(obj.trace()[96].params, obj.trace()[best_i].params);

  MeteredObjective small(gen_ladder(4), 2, EvalMode::exact(), 11);
  EXPECT_THROW(rl_optimize(small, make_policy(2, 1), 3), DomainError);
  MeteredObjective mismatch(gen_ladder(4), 2, EvalMode::exact(), 192);
  EXPECT_THROW(rl_optimize(mismatch, b, 3), DomainError);
  MeteredObjective empty(Graph(3, {}), 1, EvalMode::exact(), 192);
  EXPECT_EQ(rl_optimize(empty, b, 3).best_value, 0.0);
}

TEST(PolicyJson, RoundTrip) {
  PolicyBundle b = make_policy(2, 13);
  const PolicyBundle back = policy_from_json(nlohmann::json::parse(to_json(b).dump()));
  EXPECT_EQ(back.depth, 2);
  EXPECT_EQ(back.history, kHistoryLength);
  EXPECT_EQ(back.noise_variance, b.noise_variance);
  EXPECT_TRUE(back.actor == b.actor);
  EXPECT_TRUE(back.critic == b.critic);
  nlohmann::json bad = to_json(b);
  bad["p"] = 1;
  EXPECT_THROW(policy_from_json(bad), DomainError);
}

TEST(ObsNormalizer, MergedStatisticsMatchOnePass) {
  Rng rng(14);
  Eigen::MatrixXd all(3, 50);
  for (Eigen::Index i = 0; i < all.size(); ++i) all.data()[i] = rng.uniform(-2.0, 5.0);
  ObsNormalizer a, b;
  a.update(all);
  b.update(all.leftCols(7));
  b.update(all.middleCols(7, 30));
  b.update(all.rightCols(13));
  EXPECT_EQ(b.count, 50.0);
  EXPECT_LE((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.m2 - b.m2).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::MatrixXd z = all;
  a.apply(z);
  EXPECT_LE(z.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(z.row(1).squaredNorm() / 50.0, 1.0, 1e-6);
}

TEST(ObsNormalizer, EmptyIsIdentityAndClipped) {
  ObsNormalizer n;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(2, 3, 0.25);
  n.apply(x);
  EXPECT_TRUE((x.array() == 0.25).all());
  Eigen::MatrixXd data(2, 4);
  data << 0, 0, 0, 1e-3, 1, 2, 3, 4;
  n.update(data);
  Eigen::MatrixXd far = Eigen::MatrixXd::Constant(2, 1, 100.0);
  n.apply(far);
  EXPECT_EQ(far(0, 0), ObsNormalizer::kClip);
}

TEST(Train, ObservationStatisticsFollowTheFlag) {
  PpoConfig cfg = PpoConfig::desk();
  cfg.epochs = 2;
  cfg.episodes_per_epoch = 2;
  cfg.episode_length = 8;
  cfg.reward_probes = 20;
  const Suite suite = build_train_set();
  const TrainResult on = train(suite, 1, cfg, 5);
  EXPECT_EQ(on.bundle.obs.count, 2.0 * 2 * 8);
  const PolicyBundle back = policy_from_json(nlohmann::json::parse(to_json(on.bundle).dump()));
  EXPECT_TRUE(back.obs == on.bundle.obs);
  const std::vector<double> st(12, 0.01);
  EXPECT_EQ(policy_forward(back, st).mean, policy_forward(on.bundle, st).mean);
  cfg.normalize_observations = false;
  EXPECT_FALSE(train(suite, 1, cfg, 5).bundle.obs.active());
}

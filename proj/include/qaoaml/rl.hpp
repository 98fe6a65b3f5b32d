#pragma once

// Reinforcement-learned QAOA optimizer.
//
// The environment walks through parameter space: the state holds finite
// differences of the objective and the parameters between the current
// iterate and the previous L iterates, an action is a bounded step, and the
// reward is the normalized change of the objective. A Gaussian policy with
// fixed variance is trained with clipped-surrogate PPO and GAE advantages;
// at test time its mean drives the first half of the budget and Nelder-Mead
// spends the rest.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/mlp.hpp"
#include "qaoaml/optim.hpp"
#include "qaoaml/parallel.hpp"
#include "qaoaml/qaoa.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

inline constexpr std::string_view kPolicySchema = "qaoaml.policy/v1";
inline constexpr int kHistoryLength = 4;
inline constexpr int kEpisodeLength = 64;
inline constexpr int kHiddenUnits = 64;
inline constexpr double kActionBound = 0.1;
inline const double kNoiseVariance = std::exp(-6.0);

struct PpoConfig {
  double clip = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.97;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  int max_passes = 80;
  double kl_stop = 0.015;
  int epochs = 750;
  int episodes_per_epoch = 128;
  int episode_length = kEpisodeLength;
  int history = kHistoryLength;
  double noise_variance = kNoiseVariance;
  int reward_probes = 500;
  bool normalize_observations = true;

  /// Reduced schedule for routine runs: 50 epochs of 16 episodes.
  static PpoConfig desk() {
    PpoConfig c;
    c.epochs = 50;
    c.episodes_per_epoch = 16;
    return c;
  }

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw DomainError("ppo: clip must lie in (0, 1)");
    if (!(discount > 0.0 && discount <= 1.0)) throw DomainError("ppo: discount must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw DomainError("ppo: GAE lambda must lie in [0, 1]");
    if (max_passes < 1 || epochs < 1 || episodes_per_epoch < 1 || episode_length < 1)
      throw DomainError("ppo: passes, epochs, episodes and episode length must be >= 1");
    if (!(kl_stop > 0.0)) throw DomainError("ppo: KL stop threshold must be positive");
    if (history < 1) throw DomainError("ppo: history length must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Policy

/// Running per-feature standardization of policy inputs. Statistics only
/// change between updates and are frozen at test time; with no data it is
/// the identity.
struct ObsNormalizer {
  static constexpr double kClip = 10.0;
  double count = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;  // sum of squared deviations

  [[nodiscard]] bool active() const noexcept { return count >= 2.0; }

  [[nodiscard]] Eigen::VectorXd stddev() const {
    return (m2.array() / count + 1e-8).sqrt().matrix();
  }

  /// Standardizes the columns of `x` in place.
  void apply(Eigen::MatrixXd& x) const {
    if (!active()) return;
    if (x.rows() != mean.size()) throw DomainError("observation normalizer: dimension mismatch");
    const Eigen::ArrayXd sd = stddev().array();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      x.col(c) = ((x.col(c).array() - mean.array()) / sd).cwiseMax(-kClip).cwiseMin(kClip).matrix();
  }

  /// Merges the columns of `x` (parallel Welford update).
  void update(const Eigen::MatrixXd& x) {
    if (x.cols() == 0) return;
    const double nb = static_cast<double>(x.cols());
    const Eigen::VectorXd mb = x.rowwise().mean();
    const Eigen::VectorXd m2b = (x.colwise() - mb).rowwise().squaredNorm();
    if (count == 0.0) {
      count = nb, mean = mb, m2 = m2b;
      return;
    }
    const Eigen::VectorXd delta = mb - mean;
    const double total = count + nb;
    mean += delta * (nb / total);
    m2 += m2b + delta.cwiseProduct(delta) * (count * nb / total);
    count = total;
  }

  friend bool operator==(const ObsNormalizer& a, const ObsNormalizer& b) {
    return a.count == b.count && a.mean.size() == b.mean.size() && a.m2.size() == b.m2.size() &&
           a.mean == b.mean && a.m2 == b.m2;
  }
};

/// Actor and critic networks plus the fixed exploration variance.
struct PolicyBundle {
  int depth = 1;
  int history = kHistoryLength;
  double noise_variance = kNoiseVariance;
  Mlp actor;
  Mlp critic;
  ObsNormalizer obs;

  /// Generic constructor; the QAOA policy uses make_policy().
  static PolicyBundle create(int input_dim, int action_dim, Rng& rng,
                             double noise_variance = kNoiseVariance, int hidden = kHiddenUnits) {
    PolicyBundle b;
    b.noise_variance = noise_variance;
    b.actor = Mlp({input_dim, hidden, hidden, action_dim}, true, kActionBound, rng, 0.01);
    b.critic = Mlp({input_dim, hidden, hidden, 1}, false, 1.0, rng, 1.0);
    return b;
  }

  [[nodiscard]] int input_dim() const { return actor.input_dim(); }
  [[nodiscard]] int action_dim() const { return actor.output_dim(); }
};

inline int state_dimension(int depth, int history = kHistoryLength) {
  return (2 * depth + 1) * history;
}

inline PolicyBundle make_policy(int depth, std::uint64_t seed, int history = kHistoryLength,
                                double noise_variance = kNoiseVariance) {
  Rng rng = Rng(seed).substream("policy-init");
  PolicyBundle b = PolicyBundle::create(state_dimension(depth, history), 2 * depth, rng, noise_variance);
  b.depth = depth;
  b.history = history;
  return b;
}

struct PolicyOutput {
  std::vector<double> mean;
  double value = 0.0;
};

inline PolicyOutput policy_forward(const PolicyBundle& b, const std::vector<double>& state) {
  if (static_cast<int>(state.size()) != b.input_dim())
    throw DomainError("policy: state dimension " + std::to_string(state.size()) +
                      " does not match network input " + std::to_string(b.input_dim()));
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(state.data(), b.input_dim(), 1);
  b.obs.apply(x);
  const Eigen::MatrixXd mu = b.actor.forward(x);
  const Eigen::MatrixXd v = b.critic.forward(x);
  return {{mu.data(), mu.data() + mu.size()}, v(0, 0)};
}

/// log N(action; mean, variance I) for a diagonal Gaussian.
inline double gaussian_log_prob(const std::vector<double>& action, const std::vector<double>& mean,
                                double variance) {
  double sq = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) sq += (action[i] - mean[i]) * (action[i] - mean[i]);
  return -0.5 * sq / variance -
         0.5 * static_cast<double>(action.size()) * std::log(2.0 * std::numbers::pi * variance);
}

struct SampledAction {
  std::vector<double> step;  // clamped to [-0.1, 0.1]
  double log_prob = 0.0;     // of the unclamped draw
  std::vector<double> raw;   // unclamped draw, used by the PPO ratio
};

inline SampledAction sample_action(const PolicyBundle& b, const std::vector<double>& state, Rng& rng) {
  const PolicyOutput out = policy_forward(b, state);
  SampledAction a;
  a.raw = out.mean;
  if (b.noise_variance > 0.0) {
    const double sd = std::sqrt(b.noise_variance);
    for (double& x : a.raw) x += sd * rng.normal();
    a.log_prob = gaussian_log_prob(a.raw, out.mean, b.noise_variance);
  }
  a.step = a.raw;
  for (double& x : a.step) x = std::clamp(x, -kActionBound, kActionBound);
  return a;
}

// ---------------------------------------------------------------------------
// Environment

struct HistoryPoint {
  std::vector<double> params;  // flat, wrapped
  double f = 0.0;
};

struct EnvState {
  QaoaParams current;
  double current_f = 0.0;
  double normalizer = 1.0;
  int history_length = kHistoryLength;
  std::deque<HistoryPoint> history;  // previous iterates, newest first

  /// (2p+1)L features: for each of the L previous iterates, newest first,
  /// [ (f_t - f_l)/normalizer, wrap(beta_t - beta_l), wrap(gamma_t - gamma_l) ];
  /// zeros where fewer than L iterates exist.
  [[nodiscard]] std::vector<double> features() const {
    const std::vector<double> x = current.flat();
    const std::size_t rec = x.size() + 1;
    std::vector<double> s(rec * history_length, 0.0);
    for (std::size_t l = 0; l < history.size(); ++l) {
      s[l * rec] = (current_f - history[l].f) / normalizer;
      for (std::size_t k = 0; k < x.size(); ++k)
        s[l * rec + 1 + k] = wrap_angle(x[k] - history[l].params[k]);
    }
    return s;
  }
};

/// Mean exact f over `probes` uniform parameter draws; 1 for edgeless graphs.
inline double reward_normalizer(const Graph& g, int depth, int probes, std::uint64_t seed) {
  if (probes < 1) throw DomainError("reward normalizer: need at least one probe");
  if (g.edge_count() == 0) return 1.0;
  const CutDiagonal diag = cut_diagonal(g);
  Rng rng = Rng(seed).substream("normalizer");
  double sum = 0.0;
  for (int i = 0; i < probes; ++i) sum += expectation_exact(diag, QaoaParams::uniform(depth, rng)).mean;
  return sum / probes;
}

/// Starts an episode at `start` (one metered evaluation).
inline EnvState env_reset_at(MeteredObjective& obj, const QaoaParams& start, double normalizer = 1.0,
                             int history = kHistoryLength) {
  if (obj.remaining() < 1) throw BudgetError("env reset: no budget left");
  if (!(normalizer > 0.0)) throw DomainError("env reset: normalizer must be positive");
  EnvState s;
  s.current = start;
  s.current_f = obj.evaluate(start).mean;
  s.normalizer = normalizer;
  s.history_length = history;
  return s;
}

/// Starts an episode at a uniform random point.
inline EnvState env_reset(MeteredObjective& obj, std::uint64_t seed, double normalizer = 1.0) {
  Rng rng = Rng(seed).substream("env-reset");
  return env_reset_at(obj, QaoaParams::uniform(obj.depth(), rng), normalizer);
}

struct StepResult {
  EnvState state;
  double reward = 0.0;
};

inline StepResult env_step(const EnvState& s, const std::vector<double>& step, MeteredObjective& obj) {
  std::vector<double> x = s.current.flat();
  if (step.size() != x.size()) throw DomainError("env step: action dimension mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += step[k];
  StepResult r;
  r.state.current = QaoaParams::from_flat(x);
  r.state.current_f = obj.evaluate(r.state.current).mean;
  r.state.normalizer = s.normalizer;
  r.state.history_length = s.history_length;
  r.state.history = s.history;
  r.state.history.push_front({s.current.flat(), s.current_f});
  while (static_cast<int>(r.state.history.size()) > s.history_length) r.state.history.pop_back();
  r.reward = (r.state.current_f - s.current_f) / s.normalizer;
  return r;
}

// ---------------------------------------------------------------------------
// PPO

struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;  // unclamped Gaussian draws
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  double bootstrap_value = 0.0;  // critic value at the cut-off state

  [[nodiscard]] std::size_t size() const { return rewards.size(); }
};

/// Flattened batch with GAE advantages and bootstrapped returns.
struct PpoBatch {
  Eigen::MatrixXd states;   // input_dim x N
  Eigen::MatrixXd actions;  // action_dim x N
  Eigen::VectorXd log_probs_old;
  Eigen::VectorXd advantages;  // normalized
  Eigen::VectorXd returns;
};

inline PpoBatch make_batch(const std::vector<Trajectory>& trajs, const PpoConfig& cfg) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += t.size();
  if (n == 0) throw DomainError("ppo: empty batch");
  const Eigen::Index in = static_cast<Eigen::Index>(trajs.front().states.front().size());
  const Eigen::Index ad = static_cast<Eigen::Index>(trajs.front().actions.front().size());
  PpoBatch b;
  b.states.resize(in, n);
  b.actions.resize(ad, n);
  b.log_probs_old.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  Eigen::Index col = 0;
  for (const auto& t : trajs) {
    const std::size_t len = t.size();
    double gae = 0.0;
    double ret = t.bootstrap_value;
    for (std::size_t k = len; k-- > 0;) {
      const double next_v = k + 1 < len ? t.values[k + 1] : t.bootstrap_value;
      const double delta = t.rewards[k] + cfg.discount * next_v - t.values[k];
      gae = delta + cfg.discount * cfg.gae_lambda * gae;
      ret = t.rewards[k] + cfg.discount * ret;
      b.advantages[col + k] = gae;
      b.returns[col + k] = ret;
    }
    for (std::size_t k = 0; k < len; ++k) {
      b.states.col(col + k) = Eigen::Map<const Eigen::VectorXd>(t.states[k].data(), in);
      b.actions.col(col + k) = Eigen::Map<const Eigen::VectorXd>(t.actions[k].data(), ad);
      b.log_probs_old[col + k] = t.log_probs[k];
    }
    col += static_cast<Eigen::Index>(len);
  }
  const double mean = b.advantages.mean();
  const double var = (b.advantages.array() - mean).square().mean();
  b.advantages.array() -= mean;
  if (var > 1e-24) b.advantages /= std::sqrt(var);
  return b;
}

/// Per-sample log-probabilities of the batch actions under `means`.
inline Eigen::VectorXd batch_log_probs(const Eigen::MatrixXd& actions, const Eigen::MatrixXd& means,
                                       double variance) {
  const double d = static_cast<double>(actions.rows());
  return (-0.5 * (actions - means).colwise().squaredNorm().array() / variance -
          0.5 * d * std::log(2.0 * std::numbers::pi * variance))
      .matrix()
      .transpose();
}

/// Clipped surrogate objective (to be maximized) and, optionally, its
/// gradient with respect to the actor parameters.
inline double actor_objective(const Mlp& actor, const PpoBatch& b, double variance, double clip,
                              MlpGrad* grad = nullptr, double* clip_fraction = nullptr) {
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = actor.forward(b.states, grad ? &cache : nullptr);
  const Eigen::VectorXd logp = batch_log_probs(b.actions, mu, variance);
  const Eigen::Index n = b.states.cols();
  Eigen::MatrixXd upstream;
  if (grad) upstream = Eigen::MatrixXd::Zero(mu.rows(), n);
  double total = 0.0;
  Eigen::Index clipped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ratio = std::exp(logp[i] - b.log_probs_old[i]);
    const double adv = b.advantages[i];
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    total += std::min(unclipped, clipped_term);
    const bool inactive = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
    if (inactive) ++clipped;
    if (grad && !inactive)
      upstream.col(i) = (adv * ratio / variance / static_cast<double>(n)) * (b.actions.col(i) - mu.col(i));
  }
  if (grad) *grad = actor.backward(cache, upstream);
  if (clip_fraction) *clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  return total / static_cast<double>(n);
}

/// Mean squared error of the critic against the returns, with optional gradient.
inline double critic_loss(const Mlp& critic, const PpoBatch& b, MlpGrad* grad = nullptr) {
  Mlp::Cache cache;
  const Eigen::MatrixXd v = critic.forward(b.states, grad ? &cache : nullptr);
  const Eigen::RowVectorXd err = v.row(0) - b.returns.transpose();
  const double n = static_cast<double>(b.states.cols());
  if (grad) *grad = critic.backward(cache, (2.0 / n) * err);
  return err.squaredNorm() / n;
}

/// Mean KL(old || new) between fixed-variance Gaussian policies.
inline double mean_kl(const Eigen::MatrixXd& mu_old, const Eigen::MatrixXd& mu_new, double variance) {
  return ((mu_old - mu_new).colwise().squaredNorm().array() / (2.0 * variance)).mean();
}

struct PpoDiagnostics {
  int actor_passes = 0;
  bool early_stopped = false;
  double mean_kl = 0.0;  // after the update
  double clip_fraction = 0.0;
  double surrogate_before = 0.0;
  double value_loss_before = 0.0;
  double value_loss_after = 0.0;
};

/// Policy plus the optimizer state carried across updates.
struct PpoLearner {
  PolicyBundle bundle;
  Adam actor_opt;
  Adam critic_opt;

  PpoLearner(PolicyBundle b, const PpoConfig& cfg)
      : bundle(std::move(b)),
        actor_opt(bundle.actor, cfg.actor_lr),
        critic_opt(bundle.critic, cfg.critic_lr) {}
};

inline PpoDiagnostics ppo_update(PpoLearner& learner, const std::vector<Trajectory>& trajs,
                                 const PpoConfig& cfg) {
  cfg.validate();
  PolicyBundle& pb = learner.bundle;
  if (!(pb.noise_variance > 0.0)) throw DomainError("ppo: training needs a positive noise variance");
  PpoBatch batch = make_batch(trajs, cfg);
  pb.obs.apply(batch.states);
  const Eigen::MatrixXd mu_old = pb.actor.forward(batch.states);

  PpoDiagnostics diag;
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    if (pass > 0) {
      const double kl = mean_kl(mu_old, pb.actor.forward(batch.states), pb.noise_variance);
      if (kl > cfg.kl_stop) {
        diag.early_stopped = true;
        break;
      }
    }
    MlpGrad g;
    double clip_frac = 0.0;
    const double obj = actor_objective(pb.actor, batch, pb.noise_variance, cfg.clip, &g, &clip_frac);
    if (pass == 0) diag.surrogate_before = obj;
    diag.clip_fraction = clip_frac;
    for (auto& w : g.weights) w = -w;  // ascend
    for (auto& bb : g.biases) bb = -bb;
    learner.actor_opt.step(pb.actor, g);
    ++diag.actor_passes;
  }
  diag.mean_kl = mean_kl(mu_old, pb.actor.forward(batch.states), pb.noise_variance);

  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    MlpGrad g;
    const double loss = critic_loss(pb.critic, batch, &g);
    if (pass == 0) diag.value_loss_before = loss;
    learner.critic_opt.step(pb.critic, g);
  }
  diag.value_loss_after = critic_loss(pb.critic, batch);
  return diag;
}

/// One-shot update with fresh optimizer state.
inline std::pair<PolicyBundle, PpoDiagnostics> ppo_update(const PolicyBundle& bundle,
                                                          const std::vector<Trajectory>& trajs,
                                                          const PpoConfig& cfg) {
  PpoLearner learner(bundle, cfg);
  PpoDiagnostics d = ppo_update(learner, trajs, cfg);
  return {std::move(learner.bundle), d};
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  PolicyBundle bundle;
  std::vector<double> learning_curve;  // mean discounted episode reward per epoch
  std::vector<double> normalizers;     // per training instance
  std::vector<PpoDiagnostics> diagnostics;
};

/// Rolls out one episode of `cfg.episode_length` steps with exploration noise.
inline Trajectory collect_episode(const PolicyBundle& b, const std::shared_ptr<const CutDiagonal>& diag,
                                  std::size_t edges, double normalizer, const PpoConfig& cfg,
                                  EvalMode mode, Rng rng) {
  MeteredObjective obj(diag, edges, b.depth, mode, static_cast<std::size_t>(cfg.episode_length) + 1);
  EnvState s = env_reset_at(obj, QaoaParams::uniform(b.depth, rng), normalizer, b.history);
  Trajectory t;
  for (int k = 0; k < cfg.episode_length; ++k) {
    std::vector<double> feat = s.features();
    const double value = policy_forward(b, feat).value;
    SampledAction a = sample_action(b, feat, rng);
    StepResult r = env_step(s, a.step, obj);
    t.states.push_back(std::move(feat));
    t.actions.push_back(std::move(a.raw));
    t.log_probs.push_back(a.log_prob);
    t.rewards.push_back(r.reward);
    t.values.push_back(value);
    s = std::move(r.state);
  }
  t.bootstrap_value = policy_forward(b, s.features()).value;
  return t;
}

inline double discounted_return(const std::vector<double>& rewards, double discount) {
  double acc = 0.0;
  double w = 1.0;
  for (double r : rewards) acc += w * r, w *= discount;
  return acc;
}

/// PPO training over `suite`, instances visited round-robin episode by
/// episode, one policy update per epoch. `mode.shots == 0` trains on exact
/// objectives; otherwise every evaluation uses `mode.shots` shots.
inline TrainResult train(const Suite& suite, int depth, const PpoConfig& cfg, std::uint64_t seed,
                         EvalMode mode = EvalMode::exact(), unsigned threads = 1) {
  cfg.validate();
  if (suite.empty()) throw DomainError("train: empty training suite");
  const Rng root = Rng(seed).substream("train");
  TrainResult out;
  PpoLearner learner(make_policy(depth, root.substream("init").key(), cfg.history, cfg.noise_variance), cfg);

  std::vector<std::shared_ptr<const CutDiagonal>> diags;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    diags.push_back(std::make_shared<const CutDiagonal>(cut_diagonal(suite[i].graph)));
    out.normalizers.push_back(
        reward_normalizer(suite[i].graph, depth, cfg.reward_probes, root.substream("normalizer", i).key()));
  }

  std::size_t episode_counter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::size_t k = static_cast<std::size_t>(cfg.episodes_per_epoch);
    std::vector<Trajectory> trajs(k);
    parallel_for(k, threads, [&](std::size_t e) {
      const std::size_t global = episode_counter + e;
      const std::size_t inst = global % suite.size();
      EvalMode m = mode;
      if (!m.is_exact()) m.seed = root.substream("episode-shots", global).key();
      trajs[e] = collect_episode(learner.bundle, diags[inst], suite[inst].graph.edge_count(),
                                 out.normalizers[inst], cfg, m, root.substream("episode", global));
    });
    episode_counter += k;
    double total = 0.0;
    for (const auto& t : trajs) total += discounted_return(t.rewards, cfg.discount);
    out.learning_curve.push_back(total / static_cast<double>(k));
    out.diagnostics.push_back(ppo_update(learner, trajs, cfg));
    if (cfg.normalize_observations) {
      std::size_t n = 0;
      for (const auto& t : trajs) n += t.states.size();
      Eigen::MatrixXd raw(learner.bundle.input_dim(), static_cast<Eigen::Index>(n));
      Eigen::Index col = 0;
      for (const auto& t : trajs)
        for (const auto& st : t.states) raw.col(col++) = Eigen::Map<const Eigen::VectorXd>(st.data(), raw.rows());
      learner.bundle.obs.update(raw);
    }
  }
  out.bundle = std::move(learner.bundle);
  return out;
}

// ---------------------------------------------------------------------------
// Test-time optimizer

/// Phase 1: noise-free policy rollout for B/2 evaluations (including the
/// reset) from `start`. Phase 2: Nelder-Mead from the phase-1 best with the
/// remaining budget. Objective differences in the state are scaled by
/// |E|/2, the uniform-superposition energy, which costs no evaluations.
inline OptResult rl_optimize(MeteredObjective& obj, const PolicyBundle& b, const QaoaParams& start) {
  const std::size_t budget = obj.remaining();
  const std::size_t p = static_cast<std::size_t>(obj.depth());
  if (b.depth != obj.depth()) throw DomainError("rl_optimize: policy depth does not match objective");
  if (budget < 4 * p + 4) throw DomainError("rl_optimize: budget below 4p+4");
  PolicyBundle policy = b;
  policy.noise_variance = 0.0;
  const double normalizer = obj.edge_count() > 0 ? 0.5 * static_cast<double>(obj.edge_count()) : 1.0;

  const std::size_t phase1 = budget / 2;
  EnvState s = env_reset_at(obj, start, normalizer, b.history);
  QaoaParams best = s.current;
  double best_f = s.current_f;
  for (std::size_t k = 1; k < phase1; ++k) {
    const PolicyOutput out = policy_forward(policy, s.features());
    std::vector<double> step = out.mean;
    for (double& x : step) x = std::clamp(x, -kActionBound, kActionBound);
    s = env_step(s, step, obj).state;
    if (s.current_f > best_f) best_f = s.current_f, best = s.current;
  }
  nelder_mead(obj, best);
  return result_from_trace(obj);
}

inline OptResult rl_optimize(MeteredObjective& obj, const PolicyBundle& b, std::uint64_t seed) {
  Rng rng = Rng(seed).substream("env-reset");
  return rl_optimize(obj, b, QaoaParams::uniform(obj.depth(), rng));
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const PolicyBundle& b) {
  return {{"schema", kPolicySchema},
          {"p", b.depth},
          {"history", b.history},
          {"noise_variance", b.noise_variance},
          {"arch",
           {{"layers", b.actor.sizes()},
            {"critic_layers", b.critic.sizes()},
            {"activation", "tanh"},
            {"scale", b.actor.output_scale()}}},
          {"actor_weights", to_json(b.actor)},
          {"critic_weights", to_json(b.critic)},
          {"obs_norm",
           {{"count", b.obs.count},
            {"mean", std::vector<double>(b.obs.mean.data(), b.obs.mean.data() + b.obs.mean.size())},
            {"m2", std::vector<double>(b.obs.m2.data(), b.obs.m2.data() + b.obs.m2.size())}}}};
}

inline PolicyBundle policy_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kPolicySchema) throw DomainError("not a policy file (schema mismatch)");
  PolicyBundle b;
  b.depth = j.at("p").get<int>();
  b.history = j.at("history").get<int>();
  b.noise_variance = j.at("noise_variance").get<double>();
  const auto& arch = j.at("arch");
  Rng dummy;
  b.actor = Mlp(arch.at("layers").get<std::vector<int>>(), true, arch.at("scale").get<double>(), dummy);
  b.critic = Mlp(arch.at("critic_layers").get<std::vector<int>>(), false, 1.0, dummy);
  load_weights(b.actor, j.at("actor_weights"));
  load_weights(b.critic, j.at("critic_weights"));
  if (j.contains("obs_norm")) {
    const auto& o = j.at("obs_norm");
    const auto mean = o.at("mean").get<std::vector<double>>();
    const auto m2 = o.at("m2").get<std::vector<double>>();
    b.obs.count = o.at("count").get<double>();
    b.obs.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    b.obs.m2 = Eigen::Map<const Eigen::VectorXd>(m2.data(), static_cast<Eigen::Index>(m2.size()));
    if (b.obs.active() && (b.obs.mean.size() != b.input_dim() || b.obs.m2.size() != b.input_dim()))
      throw DomainError("policy file: observation statistics do not match the input dimension");
  }
  if (b.input_dim() != state_dimension(b.depth, b.history) || b.action_dim() != 2 * b.depth)
    throw DomainError("policy file: layer sizes do not match p and history length");
  return b;
}

}  // namespace qaoaml

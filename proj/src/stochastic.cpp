#include "driftlab/stochastic.hpp"

#include <algorithm>
#include <cmath>

#include "driftlab/errors.hpp"

namespace driftlab {

namespace {

double clamp_param(double v) { return std::clamp(v, kScoreClamp, 1.0 - kScoreClamp); }

int sample_scalar(double theta, int given, RngStream& rng) {
  return rng.bernoulli(theta) ? given : 1 - given;
}

// Running baseline state; seeded with the first batch mean so that a
// constant reward stream yields exactly zero advantage.
class BaselineTracker {
 public:
  explicit BaselineTracker(Baseline spec) : spec_(spec) {}

  double value() const { return spec_.kind == BaselineKind::None || !seeded_ ? 0.0 : value_; }

  void observe(double batch_mean) {
    if (spec_.kind == BaselineKind::None) return;
    if (!seeded_) {
      value_ = batch_mean;
      seeded_ = true;
    } else {
      value_ = spec_.decay * value_ + (1.0 - spec_.decay) * batch_mean;
    }
  }

 private:
  Baseline spec_;
  double value_ = 0.0;
  bool seeded_ = false;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (episodes == 0) throw ConfigError("episodes must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (baseline.kind == BaselineKind::MovingAverage && !(baseline.decay > 0.0 && baseline.decay < 1.0)) {
    throw ConfigError("baseline decay must lie in (0, 1)");
  }
}

EpisodeRecord sample_episode(const ScalarPolicyPair& policy, const SignalingGame& game, RngStream& rng) {
  if (game.num_symbols() != 2) throw DimensionMismatch("sample_episode requires a 2-symbol game");
  EpisodeRecord ep;
  ep.obs = static_cast<int>(rng.categorical(game.obs_prior()));
  ep.msg = sample_scalar(policy.sigma, ep.obs, rng);
  ep.action = sample_scalar(policy.lambda, ep.msg, rng);
  ep.reward = game.reward(ep.obs, ep.action);
  return ep;
}

std::array<double, 2> score(const EpisodeRecord& episode, const ScalarPolicyPair& policy) {
  const double s = clamp_param(policy.sigma);
  const double l = clamp_param(policy.lambda);
  return {episode.msg == episode.obs ? 1.0 / s : -1.0 / (1.0 - s),
          episode.action == episode.msg ? 1.0 / l : -1.0 / (1.0 - l)};
}

std::array<double, 2> reinforce_estimate(std::span<const EpisodeRecord> batch, const ScalarPolicyPair& policy,
                                         double baseline) {
  if (batch.empty()) throw std::invalid_argument("reinforce_estimate: empty batch");
  std::array<double, 2> g{0.0, 0.0};
  for (const auto& ep : batch) {
    const auto sc = score(ep, policy);
    const double adv = ep.reward - baseline;
    g[0] += adv * sc[0];
    g[1] += adv * sc[1];
  }
  const double n = static_cast<double>(batch.size());
  return {g[0] / n, g[1] / n};
}

TrainResult sgd_train(const ScalarPolicyPair& init, const SignalingGame& game, const TrainConfig& cfg,
                      RngStream& rng) {
  cfg.validate();
  ScalarPolicyPair p{clamp_param(init.sigma), clamp_param(init.lambda)};
  BaselineTracker baseline(cfg.baseline);

  TrainResult out;
  out.trajectory.mode = FlowMode::Single;
  out.trajectory.times.push_back(0.0);
  out.trajectory.states.push_back({p.sigma, p.lambda});

  std::vector<EpisodeRecord> batch;
  std::size_t step = 0;
  while (out.episodes_used < cfg.episodes) {
    const std::size_t n = std::min(cfg.batch_size, cfg.episodes - out.episodes_used);
    batch.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(sample_episode(p, game, rng));
      total += batch.back().reward;
    }
    const auto g = reinforce_estimate(batch, p, baseline.value());
    p.sigma = clamp_param(p.sigma + cfg.learning_rate * g[0]);
    p.lambda = clamp_param(p.lambda + cfg.learning_rate * g[1]);
    baseline.observe(total / static_cast<double>(n));
    out.episodes_used += n;
    ++step;
    out.trajectory.times.push_back(static_cast<double>(step));
    out.trajectory.states.push_back({p.sigma, p.lambda});
    out.batch_mean_reward.push_back(total / static_cast<double>(n));
  }
  out.trajectory.terminal_class = classify_state(out.trajectory.final_state(), FlowMode::Single, 1e-6);
  return out;
}

TrainResult multitask_sgd_train(const MultitaskScalarParams& init, const std::array<SignalingGame, 2>& games,
                                const TrainConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (init.sigma1 != init.sigma2) {
    throw UnsupportedInitialization("multitask training requires identical instructor initializations");
  }
  std::array<double, 2> sigma{clamp_param(init.sigma1), clamp_param(init.sigma2)};
  double lambda = clamp_param(init.lambda);
  std::array<BaselineTracker, 2> baselines{BaselineTracker(cfg.baseline), BaselineTracker(cfg.baseline)};

  TrainResult out;
  out.trajectory.mode = FlowMode::Multitask;
  out.trajectory.times.push_back(0.0);
  out.trajectory.states.push_back({sigma[0], sigma[1], lambda});

  std::vector<EpisodeRecord> batch;
  std::size_t step = 0;
  while (out.episodes_used < cfg.episodes) {
    const std::size_t task = cfg.schedule == TaskSchedule::RoundRobin ? step % 2 : rng.below(2);
    const std::size_t n = std::min(cfg.batch_size, cfg.episodes - out.episodes_used);
    const ScalarPolicyPair p{sigma[task], lambda};
    batch.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(sample_episode(p, games[task], rng));
      total += batch.back().reward;
    }
    const auto g = reinforce_estimate(batch, p, baselines[task].value());
    sigma[task] = clamp_param(sigma[task] + cfg.learning_rate * g[0]);
    lambda = clamp_param(lambda + cfg.learning_rate * g[1]);
    baselines[task].observe(total / static_cast<double>(n));
    out.episodes_used += n;
    ++step;
    out.trajectory.times.push_back(static_cast<double>(step));
    out.trajectory.states.push_back({sigma[0], sigma[1], lambda});
    out.batch_mean_reward.push_back(total / static_cast<double>(n));
  }
  out.trajectory.terminal_class = classify_state(out.trajectory.final_state(), FlowMode::Multitask, 1e-6);
  return out;
}

}  // namespace driftlab

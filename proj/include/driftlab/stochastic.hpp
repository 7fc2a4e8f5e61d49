#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "driftlab/flow.hpp"
#include "driftlab/random.hpp"
#include "driftlab/signaling.hpp"

namespace driftlab {

// Scalar parameters are kept in [kScoreClamp, 1 - kScoreClamp] during
// stochastic training so that log-probability scores stay finite.
inline constexpr double kScoreClamp = 1e-6;

struct EpisodeRecord {
  int obs = 0;
  int msg = 0;
  int action = 0;
  double reward = 0.0;
};

enum class BaselineKind { None, MovingAverage };

struct Baseline {
  BaselineKind kind = BaselineKind::None;
  double decay = 0.9;

  bool operator==(const Baseline&) const = default;
};

enum class TaskSchedule { RoundRobin, Sampled };

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t episodes = 20000;
  std::size_t batch_size = 32;
  Baseline baseline;
  TaskSchedule schedule = TaskSchedule::RoundRobin;

  void validate() const;
};

EpisodeRecord sample_episode(const ScalarPolicyPair& policy, const SignalingGame& game, RngStream& rng);

// d/dsigma and d/dlambda of log S(msg|obs) + log L(action|msg) for one episode.
std::array<double, 2> score(const EpisodeRecord& episode, const ScalarPolicyPair& policy);

// Score-function estimate of the exact expected-reward gradient:
// mean over the batch of (reward - baseline) * score. Parameters are clamped
// to [kScoreClamp, 1 - kScoreClamp] before scoring.
std::array<double, 2> reinforce_estimate(std::span<const EpisodeRecord> batch, const ScalarPolicyPair& policy,
                                         double baseline = 0.0);

struct TrainResult {
  Trajectory trajectory;  // times are batch indices, t = 0 is the initial state
  std::vector<double> batch_mean_reward;
  std::size_t episodes_used = 0;
};

TrainResult sgd_train(const ScalarPolicyPair& init, const SignalingGame& game, const TrainConfig& cfg,
                      RngStream& rng);

// Shared executor, one instructor per game; each batch is drawn from one
// task (round-robin or sampled per cfg.schedule) and updates that task's
// instructor and the executor.
TrainResult multitask_sgd_train(const MultitaskScalarParams& init, const std::array<SignalingGame, 2>& games,
                                const TrainConfig& cfg, RngStream& rng);

}  // namespace driftlab

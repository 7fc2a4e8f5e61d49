#include "driftlab/stochastic.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "driftlab/errors.hpp"

namespace driftlab {
namespace {

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& x) {
  double s = 0, s2 = 0;
  for (double v : x) {
    s += v;
    s2 += v * v;
  }
  const double n = double(x.size());
  const double m = s / n;
  return {m, std::sqrt(std::max(s2 / n - m * m, 0.0) / n)};
}

// Per-episode estimates of the gradient at `p`, two components.
std::array<std::vector<double>, 2> per_episode_estimates(const ScalarPolicyPair& p, const SignalingGame& game,
                                                         std::size_t n, RngStream& rng, double baseline = 0.0) {
  std::array<std::vector<double>, 2> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ep = sample_episode(p, game, rng);
    const auto g = reinforce_estimate(std::span(&ep, 1), p, baseline);
    out[0].push_back(g[0]);
    out[1].push_back(g[1]);
  }
  return out;
}

TEST(SampleEpisode, DeterministicEquilibria) {
  const auto R = SignalingGame::match();
  RngStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_episode({1.0, 1.0}, R, rng).reward, 1.0);
    EXPECT_EQ(sample_episode({0.0, 0.0}, R, rng).reward, 1.0);
  }
}

TEST(SampleEpisode, UniformPlayMeanReward) {
  const auto R = SignalingGame::match();
  RngStream rng(2, 0);
  std::vector<double> r;
  for (int i = 0; i < 100000; ++i) r.push_back(sample_episode({0.5, 0.5}, R, rng).reward);
  const auto ms = mean_se(r);
  EXPECT_NEAR(ms.mean, expected_reward({0.5, 0.5}, R), 3 * ms.se);
}

TEST(SampleEpisode, RejectsNonBinaryGame) {
  RngStream rng(3, 0);
  EXPECT_THROW(sample_episode({0.5, 0.5}, SignalingGame::match(3), rng), DimensionMismatch);
}

TEST(Score, MatchesLogProbabilityDerivative) {
  const ScalarPolicyPair p{0.35, 0.8};
  const double h = 1e-7;
  for (int o = 0; o < 2; ++o)
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < 2; ++a) {
        auto logp = [&](double s, double l) {
          return std::log(m == o ? s : 1 - s) + std::log(a == m ? l : 1 - l);
        };
        const auto sc = score({o, m, a, 0.0}, p);
        EXPECT_NEAR(sc[0], (logp(p.sigma + h, p.lambda) - logp(p.sigma - h, p.lambda)) / (2 * h), 1e-6);
        EXPECT_NEAR(sc[1], (logp(p.sigma, p.lambda + h) - logp(p.sigma, p.lambda - h)) / (2 * h), 1e-6);
      }
}

TEST(Score, FiniteAtBoundaries) {
  const auto sc = score({0, 1, 0, 1.0}, {1.0, 1.0});
  EXPECT_TRUE(std::isfinite(sc[0]));
  EXPECT_TRUE(std::isfinite(sc[1]));
}

TEST(ReinforceEstimate, UnbiasedAtExamplePoints) {
  const auto R = SignalingGame::match();
  RngStream rng(4, 0);
  const std::vector<std::pair<ScalarPolicyPair, std::array<double, 2>>> cases = {
      {{0.5, 0.5}, {0.0, 0.0}}, {{0.3, 0.9}, {0.8, -0.4}}, {{0.9, 0.3}, {-0.4, 0.8}}};
  for (const auto& [p, want] : cases) {
    const auto est = per_episode_estimates(p, R, 200000, rng);
    for (int k = 0; k < 2; ++k) {
      const auto ms = mean_se(est[k]);
      EXPECT_NEAR(ms.mean, want[k], 4 * ms.se) << p.sigma << ' ' << p.lambda << ' ' << k;
    }
  }
}

TEST(ReinforceEstimate, BaselineKeepsMeanAndCutsVariance) {
  const auto R = SignalingGame::match();
  const ScalarPolicyPair p{0.6, 0.7};
  RngStream r1(5, 0);
  RngStream r2(5, 1);
  const auto plain = per_episode_estimates(p, R, 200000, r1);
  const auto based = per_episode_estimates(p, R, 200000, r2, expected_reward(p, R));
  const auto grad = expected_reward_gradient(p, R);
  for (int k = 0; k < 2; ++k) {
    const auto a = mean_se(plain[k]);
    const auto b = mean_se(based[k]);
    EXPECT_NEAR(b.mean, grad[k], 4 * b.se);
    EXPECT_LT(b.se, a.se);
  }
}

TEST(ReinforceEstimate, EmptyBatchThrows) {
  EXPECT_THROW(reinforce_estimate({}, {0.5, 0.5}), std::invalid_argument);
}

double fraction_final_lambda(bool multitask, double s0, double l0, bool above, int seeds) {
  TrainConfig cfg;
  int hits = 0;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(100, s);
    const auto r = multitask ? multitask_sgd_train({s0, s0, l0},
                                                   {SignalingGame::match(), SignalingGame::prime_match()}, cfg, rng)
                             : sgd_train({s0, l0}, SignalingGame::match(), cfg, rng);
    const double l = r.trajectory.final_lambda();
    hits += above ? l > 0.99 : l < 0.01;
  }
  return double(hits) / seeds;
}

TEST(SgdTrain, AlignedRegion) { EXPECT_GE(fraction_final_lambda(false, 0.9, 0.9, true, 100), 0.95); }

TEST(SgdTrain, DriftRegion) { EXPECT_GE(fraction_final_lambda(false, 0.2, 0.6, false, 100), 0.95); }

TEST(SgdTrain, PoolingStartSplitsEvenly) {
  TrainConfig cfg;
  cfg.episodes = 5000;
  int above = 0;
  for (int s = 0; s < 200; ++s) {
    RngStream rng(200, s);
    above += sgd_train({0.5, 0.5}, SignalingGame::match(), cfg, rng).trajectory.final_lambda() > 0.5;
  }
  EXPECT_NEAR(above / 200.0, 0.5, 0.1);
}

TEST(SgdTrain, TrajectoryShapeAndDeterminism) {
  TrainConfig cfg;
  cfg.episodes = 1000;
  cfg.batch_size = 32;
  RngStream a(7, 7);
  RngStream b(7, 7);
  const auto ra = sgd_train({0.4, 0.7}, SignalingGame::match(), cfg, a);
  const auto rb = sgd_train({0.4, 0.7}, SignalingGame::match(), cfg, b);
  EXPECT_EQ(ra.trajectory.states, rb.trajectory.states);
  EXPECT_EQ(ra.episodes_used, 1000u);
  EXPECT_EQ(ra.trajectory.size(), 1u + 32u);  // 31 full batches and one of 8
  EXPECT_EQ(ra.batch_mean_reward.size(), 32u);
  for (const auto& x : ra.trajectory.states)
    for (double v : x) {
      EXPECT_GE(v, kScoreClamp);
      EXPECT_LE(v, 1.0 - kScoreClamp);
    }
}

TEST(SgdTrain, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  RngStream rng(0, 0);
  EXPECT_THROW(sgd_train({0.5, 0.5}, SignalingGame::match(), cfg, rng), ConfigError);
  cfg = {};
  cfg.baseline = {BaselineKind::MovingAverage, 1.5};
  EXPECT_THROW(sgd_train({0.5, 0.5}, SignalingGame::match(), cfg, rng), ConfigError);
}

TEST(MultitaskSgdTrain, AvoidsDrift) { EXPECT_GE(fraction_final_lambda(true, 0.2, 0.7, true, 100), 0.95); }

TEST(MultitaskSgdTrain, DriftsBelowHalf) { EXPECT_GE(fraction_final_lambda(true, 0.2, 0.3, false, 100), 0.95); }

TEST(MultitaskSgdTrain, DriftRateIndependentOfSigma) {
  TrainConfig cfg;
  std::vector<double> rates;
  for (double s0 : {0.1, 0.5, 0.9}) {
    int drifted = 0;
    for (int s = 0; s < 200; ++s) {
      RngStream rng(300, s);
      drifted += multitask_sgd_train({s0, s0, 0.7}, {SignalingGame::match(), SignalingGame::prime_match()}, cfg, rng)
                     .trajectory.final_lambda() < 0.5;
    }
    rates.push_back(drifted / 200.0);
  }
  // Two-proportion z statistic with the pooled rate; 3 sd.
  for (double r : rates) {
    const double pooled = (r + rates[0]) / 2;
    const double sd = std::sqrt(std::max(pooled * (1 - pooled), 1.0 / 200) * 2 / 200);
    EXPECT_LE(std::abs(r - rates[0]), 3 * sd);
  }
}

TEST(MultitaskSgdTrain, RoundRobinAlternatesTasks) {
  TrainConfig cfg;
  cfg.episodes = 64;
  cfg.batch_size = 32;
  RngStream rng(9, 9);
  const auto r =
      multitask_sgd_train({0.5, 0.5, 0.8}, {SignalingGame::match(), SignalingGame::prime_match()}, cfg, rng);
  ASSERT_EQ(r.trajectory.size(), 3u);
  // First batch touches sigma1 only, second sigma2 only.
  EXPECT_EQ(r.trajectory.states[1][1], r.trajectory.states[0][1]);
  EXPECT_EQ(r.trajectory.states[2][0], r.trajectory.states[1][0]);
}

TEST(MultitaskSgdTrain, RejectsUnequalInstructors) {
  RngStream rng(0, 0);
  EXPECT_THROW(multitask_sgd_train({0.2, 0.3, 0.7}, {SignalingGame::match(), SignalingGame::prime_match()}, {}, rng),
               UnsupportedInitialization);
}

}  // namespace
}  // namespace driftlab

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// An observation/message/action signaling game with K symbols per set.
// Rewards depend on the observation and the action only.
class SignalingGame {
 public:
  // Uniform observation prior.
  SignalingGame(int num_symbols, std::vector<double> reward_table);
  SignalingGame(int num_symbols, std::vector<double> obs_prior, std::vector<double> reward_table);

  // Reward 1 when the action index equals the observation index.
  static SignalingGame match(int num_symbols = 2);
  // Reward 1 when the action index equals the flipped observation index.
  static SignalingGame prime_match(int num_symbols = 2);

  int num_symbols() const { return num_symbols_; }
  const std::vector<double>& obs_prior() const { return obs_prior_; }
  double prior(int obs) const { return obs_prior_[obs]; }
  double reward(int obs, int action) const { return reward_table_[obs * num_symbols_ + action]; }

 private:
  int num_symbols_;
  std::vector<double> obs_prior_;
  std::vector<double> reward_table_;
};

// Presets addressable by name: "R" (match) and "Rprime" (prime_match).
SignalingGame game_preset(std::string_view name);

// Single-parameter instructor and executor. The instructor sends message i
// for observation i with probability sigma; the executor takes action i for
// message i with probability lambda.
struct ScalarPolicyPair {
  double sigma = 0.5;
  double lambda = 0.5;

  bool operator==(const ScalarPolicyPair&) const = default;
};

// Two task-specific instructors sharing one executor.
struct MultitaskScalarParams {
  double sigma1 = 0.5;
  double sigma2 = 0.5;
  double lambda = 0.5;

  bool operator==(const MultitaskScalarParams&) const = default;
};

// Conditional probability of symbol j given symbol i under a scalar
// parameter theta (theta on the diagonal, 1 - theta elsewhere; K = 2).
inline double scalar_conditional(double theta, int i, int j) { return i == j ? theta : 1.0 - theta; }

double expected_reward(const ScalarPolicyPair& policy, const SignalingGame& game);

// Sum of the two task rewards; games[0] is played by sigma1, games[1] by sigma2.
double multitask_expected_reward(const MultitaskScalarParams& params,
                                 const std::array<SignalingGame, 2>& games);

// Exact gradient (d/dsigma, d/dlambda) of expected_reward for any 2-symbol game.
std::array<double, 2> expected_reward_gradient(const ScalarPolicyPair& policy,
                                               const SignalingGame& game);

enum class FlowMode { Single, Multitask };

// PaperField is the vector field the learning-dynamics analysis uses.
// FullGradient is the exact gradient of the full expected reward, averaged
// over tasks in multitask mode; it is always exactly 2x PaperField, so the
// two conventions differ only by the time rescaling t -> 2t.
enum class FlowConvention { PaperField, FullGradient };

// (lambda - 1/2, sigma - 1/2) for the R game.
std::array<double, 2> paper_flow_single(const ScalarPolicyPair& state);

// (lambda/2 - 1/4, -lambda/2 + 1/4, sigma1/2 - sigma2/2) for the R/Rprime pair.
std::array<double, 3> paper_flow_multitask(const MultitaskScalarParams& state);

// Either field evaluated on a raw state vector: (sigma, lambda) in single
// mode, (sigma1, sigma2, lambda) in multitask mode.
struct FlowField {
  FlowMode mode = FlowMode::Single;
  FlowConvention convention = FlowConvention::PaperField;

  std::size_t dimension() const { return mode == FlowMode::Single ? 2 : 3; }
  std::vector<double> operator()(const std::vector<double>& state) const;
};

// Executor semantic drift: the natural-meaning action has probability < 1/2.
inline bool drift_flag(double lambda) { return lambda < 0.5; }

const char* to_string(FlowMode mode);
FlowMode parse_flow_mode(std::string_view name);

}  // namespace driftlab

#include "driftlab/signaling.hpp"

#include <cmath>
#include <string>

#include "driftlab/errors.hpp"

namespace driftlab {

namespace {

std::vector<double> uniform_prior(int k) {
  return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k);
}

void require_two_symbols(const SignalingGame& game) {
  if (game.num_symbols() != 2) {
    throw DimensionMismatch("scalar policies are defined for 2-symbol games, got K=" +
                            std::to_string(game.num_symbols()));
  }
}

}  // namespace

SignalingGame::SignalingGame(int num_symbols, std::vector<double> reward_table)
    : SignalingGame(num_symbols, uniform_prior(num_symbols > 0 ? num_symbols : 1),
                    std::move(reward_table)) {}

SignalingGame::SignalingGame(int num_symbols, std::vector<double> obs_prior,
                             std::vector<double> reward_table)
    : num_symbols_(num_symbols),
      obs_prior_(std::move(obs_prior)),
      reward_table_(std::move(reward_table)) {
  if (num_symbols_ <= 0) throw std::invalid_argument("SignalingGame: K must be positive");
  const auto k = static_cast<std::size_t>(num_symbols_);
  if (obs_prior_.size() != k) throw DimensionMismatch("SignalingGame: prior length != K");
  if (reward_table_.size() != k * k) throw DimensionMismatch("SignalingGame: reward table is not KxK");
  double total = 0.0;
  for (double p : obs_prior_) {
    if (!(p >= 0.0)) throw std::invalid_argument("SignalingGame: negative prior entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("SignalingGame: prior does not sum to 1");
  for (double r : reward_table_) {
    if (!std::isfinite(r)) throw std::invalid_argument("SignalingGame: non-finite reward");
  }
}

SignalingGame SignalingGame::match(int num_symbols) {
  std::vector<double> table(static_cast<std::size_t>(num_symbols * num_symbols), 0.0);
  for (int i = 0; i < num_symbols; ++i) table[i * num_symbols + i] = 1.0;
  return SignalingGame(num_symbols, std::move(table));
}

SignalingGame SignalingGame::prime_match(int num_symbols) {
  std::vector<double> table(static_cast<std::size_t>(num_symbols * num_symbols), 0.0);
  for (int i = 0; i < num_symbols; ++i) table[i * num_symbols + (num_symbols - 1 - i)] = 1.0;
  return SignalingGame(num_symbols, std::move(table));
}

SignalingGame game_preset(std::string_view name) {
  if (name == "R") return SignalingGame::match();
  if (name == "Rprime") return SignalingGame::prime_match();
  throw LookupError("unknown game preset '" + std::string(name) + "' (expected R or Rprime)");
}

double expected_reward(const ScalarPolicyPair& policy, const SignalingGame& game) {
  require_two_symbols(game);
  double total = 0.0;
  for (int o = 0; o < 2; ++o)
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < 2; ++a)
        total += game.prior(o) * scalar_conditional(policy.sigma, o, m) *
                 scalar_conditional(policy.lambda, m, a) * game.reward(o, a);
  return total;
}

double multitask_expected_reward(const MultitaskScalarParams& params,
                                 const std::array<SignalingGame, 2>& games) {
  return expected_reward({params.sigma1, params.lambda}, games[0]) +
         expected_reward({params.sigma2, params.lambda}, games[1]);
}

std::array<double, 2> expected_reward_gradient(const ScalarPolicyPair& policy,
                                               const SignalingGame& game) {
  require_two_symbols(game);
  // d/dtheta of the conditional is +1 on the diagonal and -1 off it.
  std::array<double, 2> grad{0.0, 0.0};
  for (int o = 0; o < 2; ++o)
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < 2; ++a) {
        const double w = game.prior(o) * game.reward(o, a);
        const double ds = o == m ? 1.0 : -1.0;
        const double dl = m == a ? 1.0 : -1.0;
        grad[0] += w * ds * scalar_conditional(policy.lambda, m, a);
        grad[1] += w * scalar_conditional(policy.sigma, o, m) * dl;
      }
  return grad;
}

std::array<double, 2> paper_flow_single(const ScalarPolicyPair& state) {
  return {state.lambda - 0.5, state.sigma - 0.5};
}

std::array<double, 3> paper_flow_multitask(const MultitaskScalarParams& state) {
  return {0.5 * state.lambda - 0.25, -0.5 * state.lambda + 0.25,
          0.5 * state.sigma1 - 0.5 * state.sigma2};
}

std::vector<double> FlowField::operator()(const std::vector<double>& state) const {
  if (state.size() != dimension()) throw DimensionMismatch("FlowField: state has wrong dimension");
  const double scale = convention == FlowConvention::FullGradient ? 2.0 : 1.0;
  std::vector<double> out;
  if (mode == FlowMode::Single) {
    const auto d = paper_flow_single({state[0], state[1]});
    out = {d[0], d[1]};
  } else {
    const auto d = paper_flow_multitask({state[0], state[1], state[2]});
    out = {d[0], d[1], d[2]};
  }
  for (double& v : out) v *= scale;
  return out;
}

const char* to_string(FlowMode mode) { return mode == FlowMode::Single ? "single" : "multitask"; }

FlowMode parse_flow_mode(std::string_view name) {
  if (name == "single") return FlowMode::Single;
  if (name == "multitask" || name == "multi") return FlowMode::Multitask;
  throw LookupError("unknown mode '" + std::string(name) + "' (expected single or multitask)");
}

}  // namespace driftlab

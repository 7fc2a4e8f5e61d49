#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/random.hpp"

namespace driftlab::rts {

inline constexpr int kNumUnits = 5;

enum class UnitType { Swordman = 0, Spearman = 1, Cavalry = 2, Archer = 3, Dragon = 4 };

inline constexpr std::array<UnitType, kNumUnits> kAllUnits = {
    UnitType::Swordman, UnitType::Spearman, UnitType::Cavalry, UnitType::Archer, UnitType::Dragon};

inline int index(UnitType u) { return static_cast<int>(u); }
UnitType unit_from_index(int i);
const char* unit_name(UnitType u);
UnitType parse_unit(std::string_view name);

using Matrix5 = std::array<std::array<double, kNumUnits>, kNumUnits>;

enum class VariantId { Original, B, C, D, E, F, G, H, J };

inline constexpr std::array<VariantId, 9> kAllVariants = {VariantId::Original, VariantId::B, VariantId::C,
                                                          VariantId::D,        VariantId::E, VariantId::F,
                                                          VariantId::G,        VariantId::H, VariantId::J};

const char* variant_name(VariantId v);
// Accepts "Original"/"orig"/"original" and the single letters B..J.
VariantId parse_variant(std::string_view name);

// Unit-vs-unit damage multipliers defining one game variant; entry [u][v]
// is the multiplier of attacker u against defender v.
struct AttackTable {
  std::string variant;
  Matrix5 multipliers{};

  double at(UnitType attacker, UnitType defender) const {
    return multipliers[index(attacker)][index(defender)];
  }
  bool operator==(const AttackTable&) const = default;
};

AttackTable load_attack_table(VariantId variant);
AttackTable load_attack_table(std::string_view variant);

enum class Outcome { Win, Loss, Draw };
const char* to_string(Outcome o);

Outcome resolve_combat(UnitType agent, UnitType opponent, const AttackTable& table);

// Unit with the largest multiplier margin against `opponent`; ties go to the
// lowest unit index.
UnitType best_response(UnitType opponent, const AttackTable& table);
// Every unit attaining the best margin.
std::vector<UnitType> best_responses(UnitType opponent, const AttackTable& table);

enum class OpponentMode { Cycling, Sampled };

// Rule-based opponent pool. Cycling returns unit (episode_index mod 5);
// sampled draws uniformly from a stream keyed on (seed, episode_index).
struct OpponentPool {
  OpponentMode mode = OpponentMode::Cycling;
  std::uint64_t seed = 0;
};

UnitType sample_opponent(const OpponentPool& pool, std::uint64_t episode_index);

enum class Role { Instructor, Executor };

// Row-softmax policy. Instructor rows are observations (opponent units) and
// columns are messages; executor rows are messages and columns are units.
// Message i means "build unit i".
class TabularAgent {
 public:
  explicit TabularAgent(Role role);
  TabularAgent(Role role, const Matrix5& logits);

  // Deterministic agent: row r puts `margin` extra logit on mapping[r].
  static TabularAgent deterministic(Role role, const std::array<int, kNumUnits>& mapping, double margin = 40.0);
  // Executor with `margin` on the diagonal.
  static TabularAgent identity(Role role, double margin = 40.0);

  Role role() const { return role_; }
  const Matrix5& logits() const { return logits_; }
  Matrix5& logits() { return logits_; }

  std::array<double, kNumUnits> probs(int row) const;
  Matrix5 prob_matrix() const;
  int sample(int row, RngStream& rng) const;
  int argmax(int row) const;

  bool operator==(const TabularAgent&) const = default;

 private:
  Role role_;
  Matrix5 logits_{};
};

struct Episode {
  std::string variant;
  UnitType opponent = UnitType::Swordman;
  int message = 0;
  UnitType built = UnitType::Swordman;
  Outcome outcome = Outcome::Loss;
  double reward = -1.0;
};

// Draws and losses both earn -1.
inline double outcome_reward(Outcome o) { return o == Outcome::Win ? 1.0 : -1.0; }

Episode play_episode(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table,
                     UnitType opponent, RngStream& rng);

struct BCTriple {
  UnitType obs = UnitType::Swordman;
  int msg = 0;
  UnitType act = UnitType::Swordman;
};

struct BCDataset {
  std::vector<BCTriple> triples;
  double noise_rate = 0.0;
};

// Synthetic demonstrations: obs uniform; act is a best response to obs (drawn
// uniformly among tied best responses) with probability 1 - eps, otherwise a
// uniform other unit; msg names act with probability 1 - eps, otherwise a
// uniform other message.
BCDataset bc_generate(const AttackTable& table, std::size_t n, double eps, RngStream& rng);

struct BCAgents {
  TabularAgent instructor{Role::Instructor};
  TabularAgent executor{Role::Executor};
};

// Full-batch gradient ascent on the mean log-likelihood of the dataset,
// starting from uniform agents.
BCAgents bc_train(const BCDataset& dataset, std::size_t steps, double lr);

enum class Estimator { Reinforce, ClippedSurrogate };
enum class RlBaseline { None, MovingAverage, BatchMean };

struct RlConfig {
  // Game episodes per training environment.
  std::size_t episodes = 20000;
  // Games per update (T).
  std::size_t batch_size = 32;
  double learning_rate = 0.5;
  Estimator estimator = Estimator::Reinforce;
  RlBaseline baseline = RlBaseline::MovingAverage;
  double baseline_decay = 0.9;
  double clip = 0.2;
  std::size_t update_epochs = 4;
  OpponentMode opponents = OpponentMode::Cycling;
  // Environment order in multitask training.
  bool sample_environments = false;
  // Write a log row every n updates (per environment).
  std::size_t log_every = 1;

  void validate() const;
};

struct LogRow {
  std::size_t episode = 0;  // cumulative episodes in this environment
  std::string variant;
  double win = 0.0;        // batch win fraction
  double reward = 0.0;     // batch mean reward
  double diag_mass = 0.0;  // trace of the executor's conditional matrix
};

struct TrainingLog {
  std::vector<LogRow> rows;
  std::map<std::string, std::size_t> episodes_per_environment;
};

struct SingleTaskResult {
  BCAgents agents;
  TrainingLog log;
};

SingleTaskResult rl_finetune_single(const BCAgents& init, const AttackTable& table, const RlConfig& cfg,
                                    RngStream& rng);

struct MultitaskResult {
  std::vector<TabularAgent> instructors;  // one per table, same order
  TabularAgent executor{Role::Executor};
  TrainingLog log;
};

// Task-specific instructors (all starting from `instructor`) sharing one
// executor. Requires at least two tables.
MultitaskResult rl_finetune_multitask(const TabularAgent& instructor, const TabularAgent& executor,
                                      const std::vector<AttackTable>& tables, const RlConfig& cfg, RngStream& rng);

// Fraction of wins against the cycling pool.
double evaluate_winrate(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table,
                        std::size_t n_games, RngStream& rng);

// Win rate of an executor paired with an instructor it was not trained with.
double interop_eval(const TabularAgent& foreign_instructor, const TabularAgent& executor, const AttackTable& table,
                    std::size_t n_games, RngStream& rng);

// Exact win probability against the uniform opponent mix.
double exact_winrate(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table);

}  // namespace driftlab::rts

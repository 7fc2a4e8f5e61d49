#include "driftlab/rts.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driftlab/errors.hpp"

namespace driftlab::rts {

namespace {

// Rows: attacker Swordman, Spearman, Cavalry, Archer, Dragon; columns: defender in the same order.
constexpr Matrix5 kOriginal = {{{1.0, 1.5, 0.5, 1.0, 0.0},
                                {0.5, 1.0, 1.5, 1.0, 0.0},
                                {1.5, 0.5, 1.0, 1.0, 0.0},
                                {0.5, 0.5, 0.5, 0.5, 2.0},
                                {1.0, 1.0, 1.0, 0.5, 1.0}}};
constexpr Matrix5 kRuleB = {{{1.0, 1.0, 1.0, 0.5, 1.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {0.5, 1.0, 1.5, 1.0, 0.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0}}};
constexpr Matrix5 kRuleC = {{{0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0}}};
constexpr Matrix5 kRuleD = {{{0.5, 0.5, 0.5, 0.5, 2.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0}}};
constexpr Matrix5 kRuleE = {{{1.5, 0.5, 1.0, 1.0, 0.0},
                             {0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0}}};
constexpr Matrix5 kRuleF = {{{1.0, 1.5, 0.5, 1.0, 0.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0},
                             {0.5, 1.0, 1.5, 1.0, 0.0}}};
constexpr Matrix5 kRuleG = {{{0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0}}};
constexpr Matrix5 kRuleH = {{{0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0}}};
constexpr Matrix5 kRuleJ = {{{0.5, 1.0, 1.5, 1.0, 0.0},
                             {1.0, 1.0, 1.0, 0.5, 1.0},
                             {1.0, 1.5, 0.5, 1.0, 0.0},
                             {0.5, 0.5, 0.5, 0.5, 2.0},
                             {1.5, 0.5, 1.0, 1.0, 0.0}}};

constexpr std::array<const char*, kNumUnits> kUnitNames = {"Swordman", "Spearman", "Cavalry", "Archer", "Dragon"};

double margin(UnitType u, UnitType opponent, const AttackTable& table) {
  return table.at(u, opponent) - table.at(opponent, u);
}

std::array<double, kNumUnits> softmax_row(const std::array<double, kNumUnits>& row) {
  const double mx = *std::max_element(row.begin(), row.end());
  std::array<double, kNumUnits> p{};
  double total = 0.0;
  for (int j = 0; j < kNumUnits; ++j) {
    p[j] = std::exp(row[j] - mx);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

int uniform_other(int excluded, RngStream& rng) {
  const int k = static_cast<int>(rng.below(kNumUnits - 1));
  return k < excluded ? k : k + 1;
}

// Running reward baseline for one environment.
class RewardBaseline {
 public:
  RewardBaseline(RlBaseline kind, double decay) : kind_(kind), decay_(decay) {}

  double value(double batch_mean) const {
    switch (kind_) {
      case RlBaseline::None:
        return 0.0;
      case RlBaseline::BatchMean:
        return batch_mean;
      case RlBaseline::MovingAverage:
        return seeded_ ? value_ : batch_mean;
    }
    return 0.0;
  }

  void observe(double batch_mean) {
    if (kind_ != RlBaseline::MovingAverage) return;
    value_ = seeded_ ? decay_ * value_ + (1.0 - decay_) * batch_mean : batch_mean;
    seeded_ = true;
  }

 private:
  RlBaseline kind_;
  double decay_;
  double value_ = 0.0;
  bool seeded_ = false;
};

struct Sample {
  int obs;
  int msg;
  int act;
  double reward;
  double old_logp;
};

double diag_mass(const TabularAgent& executor) {
  double d = 0.0;
  for (int m = 0; m < kNumUnits; ++m) d += executor.probs(m)[m];
  return d;
}

// Accumulates adv * weight * grad log softmax for one row.
void add_score(Matrix5& grad, int row, int chosen, const std::array<double, kNumUnits>& probs, double coeff) {
  for (int j = 0; j < kNumUnits; ++j) grad[row][j] += coeff * ((j == chosen ? 1.0 : 0.0) - probs[j]);
}

void apply(TabularAgent& agent, const Matrix5& grad, double scale) {
  for (int i = 0; i < kNumUnits; ++i)
    for (int j = 0; j < kNumUnits; ++j) agent.logits()[i][j] += scale * grad[i][j];
}

// Holds one environment's state during RL fine-tuning.
struct Environment {
  const AttackTable* table;
  RewardBaseline baseline;
  std::size_t episodes = 0;
  std::size_t updates = 0;
};

// One Algorithm-style iteration: T games against the cycling pool, then a
// policy-gradient update of (instructor, executor).
void train_batch(TabularAgent& instructor, TabularAgent& executor, Environment& env, const RlConfig& cfg,
                 RngStream& rng, TrainingLog& log) {
  const std::size_t n = std::min(cfg.batch_size, cfg.episodes - env.episodes);
  const OpponentPool pool{cfg.opponents, rng.next_u64()};
  std::vector<Sample> batch;
  batch.reserve(n);
  double total = 0.0;
  double wins = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const UnitType opp = sample_opponent(pool, env.episodes + i);
    const Episode ep = play_episode(instructor, executor, *env.table, opp, rng);
    const int o = index(opp);
    const int a = index(ep.built);
    const double logp = std::log(instructor.probs(o)[ep.message]) + std::log(executor.probs(ep.message)[a]);
    batch.push_back({o, ep.message, a, ep.reward, logp});
    total += ep.reward;
    wins += ep.outcome == Outcome::Win ? 1.0 : 0.0;
  }
  const double mean = total / static_cast<double>(n);
  const double b = env.baseline.value(mean);
  const double inv_n = 1.0 / static_cast<double>(n);

  const std::size_t epochs = cfg.estimator == Estimator::Reinforce ? 1 : cfg.update_epochs;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Matrix5 g_s{};
    Matrix5 g_l{};
    const Matrix5 ps = instructor.prob_matrix();
    const Matrix5 pl = executor.prob_matrix();
    for (const auto& s : batch) {
      const double adv = s.reward - b;
      if (adv == 0.0) continue;
      double coeff = adv;
      if (cfg.estimator == Estimator::ClippedSurrogate) {
        const double ratio = std::exp(std::log(ps[s.obs][s.msg]) + std::log(pl[s.msg][s.act]) - s.old_logp);
        // The clipped branch of min(r A, clip(r) A) has zero gradient.
        if ((adv > 0.0 && ratio > 1.0 + cfg.clip) || (adv < 0.0 && ratio < 1.0 - cfg.clip)) continue;
        coeff = adv * ratio;
      }
      add_score(g_s, s.obs, s.msg, ps[s.obs], coeff);
      add_score(g_l, s.msg, s.act, pl[s.msg], coeff);
    }
    apply(instructor, g_s, cfg.learning_rate * inv_n);
    apply(executor, g_l, cfg.learning_rate * inv_n);
  }
  env.baseline.observe(mean);
  env.episodes += n;
  ++env.updates;
  if (env.updates % cfg.log_every == 0 || env.episodes == cfg.episodes) {
    log.rows.push_back({env.episodes, env.table->variant, wins * inv_n, mean, diag_mass(executor)});
  }
}

}  // namespace

UnitType unit_from_index(int i) {
  if (i < 0 || i >= kNumUnits) throw LookupError("unit index out of range: " + std::to_string(i));
  return static_cast<UnitType>(i);
}

const char* unit_name(UnitType u) { return kUnitNames[static_cast<std::size_t>(index(u))]; }

UnitType parse_unit(std::string_view name) {
  for (UnitType u : kAllUnits) {
    if (name == unit_name(u)) return u;
  }
  throw LookupError("unknown unit '" + std::string(name) + "'");
}

const char* variant_name(VariantId v) {
  switch (v) {
    case VariantId::Original:
      return "Original";
    case VariantId::B:
      return "B";
    case VariantId::C:
      return "C";
    case VariantId::D:
      return "D";
    case VariantId::E:
      return "E";
    case VariantId::F:
      return "F";
    case VariantId::G:
      return "G";
    case VariantId::H:
      return "H";
    case VariantId::J:
      return "J";
  }
  return "?";
}

VariantId parse_variant(std::string_view name) {
  if (name == "Original" || name == "original" || name == "orig") return VariantId::Original;
  for (VariantId v : kAllVariants) {
    if (name == variant_name(v)) return v;
  }
  throw LookupError("unknown game variant '" + std::string(name) + "'");
}

AttackTable load_attack_table(VariantId variant) {
  const Matrix5* m = nullptr;
  switch (variant) {
    case VariantId::Original:
      m = &kOriginal;
      break;
    case VariantId::B:
      m = &kRuleB;
      break;
    case VariantId::C:
      m = &kRuleC;
      break;
    case VariantId::D:
      m = &kRuleD;
      break;
    case VariantId::E:
      m = &kRuleE;
      break;
    case VariantId::F:
      m = &kRuleF;
      break;
    case VariantId::G:
      m = &kRuleG;
      break;
    case VariantId::H:
      m = &kRuleH;
      break;
    case VariantId::J:
      m = &kRuleJ;
      break;
  }
  if (m == nullptr) throw LookupError("unknown game variant");
  return {variant_name(variant), *m};
}

AttackTable load_attack_table(std::string_view variant) { return load_attack_table(parse_variant(variant)); }

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Win:
      return "win";
    case Outcome::Loss:
      return "loss";
    case Outcome::Draw:
      return "draw";
  }
  return "?";
}

Outcome resolve_combat(UnitType agent, UnitType opponent, const AttackTable& table) {
  const double mine = table.at(agent, opponent);
  const double theirs = table.at(opponent, agent);
  if (mine > theirs) return Outcome::Win;
  if (mine == theirs) return Outcome::Draw;
  return Outcome::Loss;
}

UnitType best_response(UnitType opponent, const AttackTable& table) {
  UnitType best = UnitType::Swordman;
  double best_margin = margin(best, opponent, table);
  for (UnitType u : kAllUnits) {
    const double m = margin(u, opponent, table);
    if (m > best_margin) {
      best = u;
      best_margin = m;
    }
  }
  return best;
}

std::vector<UnitType> best_responses(UnitType opponent, const AttackTable& table) {
  const double target = margin(best_response(opponent, table), opponent, table);
  std::vector<UnitType> out;
  for (UnitType u : kAllUnits) {
    if (margin(u, opponent, table) == target) out.push_back(u);
  }
  return out;
}

UnitType sample_opponent(const OpponentPool& pool, std::uint64_t episode_index) {
  if (pool.mode == OpponentMode::Cycling) return unit_from_index(static_cast<int>(episode_index % kNumUnits));
  RngStream stream(pool.seed, episode_index);
  return unit_from_index(static_cast<int>(stream.below(kNumUnits)));
}

TabularAgent::TabularAgent(Role role) : role_(role) {}

TabularAgent::TabularAgent(Role role, const Matrix5& logits) : role_(role), logits_(logits) {
  for (const auto& row : logits_)
    for (double v : row)
      if (!std::isfinite(v)) throw std::invalid_argument("TabularAgent: non-finite logit");
}

TabularAgent TabularAgent::deterministic(Role role, const std::array<int, kNumUnits>& mapping, double margin) {
  Matrix5 logits{};
  for (int r = 0; r < kNumUnits; ++r) logits[r][mapping[r]] = margin;
  return TabularAgent(role, logits);
}

TabularAgent TabularAgent::identity(Role role, double margin) {
  return deterministic(role, {0, 1, 2, 3, 4}, margin);
}

std::array<double, kNumUnits> TabularAgent::probs(int row) const { return softmax_row(logits_[row]); }

Matrix5 TabularAgent::prob_matrix() const {
  Matrix5 out{};
  for (int r = 0; r < kNumUnits; ++r) out[r] = probs(r);
  return out;
}

int TabularAgent::sample(int row, RngStream& rng) const {
  const auto p = probs(row);
  return static_cast<int>(rng.categorical(p));
}

int TabularAgent::argmax(int row) const {
  const auto& r = logits_[row];
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

Episode play_episode(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table,
                     UnitType opponent, RngStream& rng) {
  Episode ep;
  ep.variant = table.variant;
  ep.opponent = opponent;
  ep.message = instructor.sample(index(opponent), rng);
  ep.built = unit_from_index(executor.sample(ep.message, rng));
  ep.outcome = resolve_combat(ep.built, opponent, table);
  ep.reward = outcome_reward(ep.outcome);
  return ep;
}

BCDataset bc_generate(const AttackTable& table, std::size_t n, double eps, RngStream& rng) {
  if (!(eps >= 0.0 && eps < 0.5)) throw DomainError("bc_generate: noise rate must lie in [0, 0.5)");
  BCDataset ds;
  ds.noise_rate = eps;
  ds.triples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BCTriple t;
    t.obs = unit_from_index(static_cast<int>(rng.below(kNumUnits)));
    const auto best = best_responses(t.obs, table);
    const UnitType target = best[rng.below(best.size())];
    t.act = rng.bernoulli(eps) ? unit_from_index(uniform_other(index(target), rng)) : target;
    t.msg = rng.bernoulli(eps) ? uniform_other(index(t.act), rng) : index(t.act);
    ds.triples.push_back(t);
  }
  return ds;
}

BCAgents bc_train(const BCDataset& dataset, std::size_t steps, double lr) {
  if (dataset.triples.empty()) throw std::invalid_argument("bc_train: empty dataset");
  Matrix5 count_s{};
  Matrix5 count_l{};
  for (const auto& t : dataset.triples) {
    count_s[index(t.obs)][t.msg] += 1.0;
    count_l[t.msg][index(t.act)] += 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(dataset.triples.size());
  BCAgents agents;
  // The log-likelihood gradient of row r is sum_j N[r][j] (e_j - p_r) = N[r] - N_r p_r.
  auto ascend = [&](TabularAgent& agent, const Matrix5& counts) {
    const Matrix5 p = agent.prob_matrix();
    for (int r = 0; r < kNumUnits; ++r) {
      double row_total = 0.0;
      for (double c : counts[r]) row_total += c;
      for (int j = 0; j < kNumUnits; ++j) {
        agent.logits()[r][j] += lr * inv_n * (counts[r][j] - row_total * p[r][j]);
      }
    }
  };
  for (std::size_t s = 0; s < steps; ++s) {
    ascend(agents.instructor, count_s);
    ascend(agents.executor, count_l);
  }
  return agents;
}

void RlConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (baseline == RlBaseline::MovingAverage && !(baseline_decay > 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("baseline decay must lie in (0, 1)");
  }
  if (estimator == Estimator::ClippedSurrogate && (!(clip > 0.0) || update_epochs == 0)) {
    throw ConfigError("clipped surrogate needs a positive clip parameter and at least one epoch");
  }
  if (log_every == 0) throw ConfigError("log_every must be at least 1");
}

SingleTaskResult rl_finetune_single(const BCAgents& init, const AttackTable& table, const RlConfig& cfg,
                                    RngStream& rng) {
  cfg.validate();
  SingleTaskResult out{init, {}};
  Environment env{&table, RewardBaseline(cfg.baseline, cfg.baseline_decay)};
  while (env.episodes < cfg.episodes) {
    train_batch(out.agents.instructor, out.agents.executor, env, cfg, rng, out.log);
  }
  out.log.episodes_per_environment[table.variant] = env.episodes;
  return out;
}

MultitaskResult rl_finetune_multitask(const TabularAgent& instructor, const TabularAgent& executor,
                                      const std::vector<AttackTable>& tables, const RlConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (tables.size() < 2) {
    throw ConfigError("multitask training needs at least two variants; use single-task training instead");
  }
  MultitaskResult out{std::vector<TabularAgent>(tables.size(), instructor), executor, {}};
  std::vector<Environment> envs;
  envs.reserve(tables.size());
  for (const auto& t : tables) envs.push_back({&t, RewardBaseline(cfg.baseline, cfg.baseline_decay)});

  auto open_envs = [&] {
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < envs.size(); ++k)
      if (envs[k].episodes < cfg.episodes) ids.push_back(k);
    return ids;
  };
  for (auto open = open_envs(); !open.empty(); open = open_envs()) {
    if (cfg.sample_environments) {
      const std::size_t k = open[rng.below(open.size())];
      train_batch(out.instructors[k], out.executor, envs[k], cfg, rng, out.log);
    } else {
      for (std::size_t k : open) train_batch(out.instructors[k], out.executor, envs[k], cfg, rng, out.log);
    }
  }
  for (const auto& env : envs) out.log.episodes_per_environment[env.table->variant] = env.episodes;
  return out;
}

double evaluate_winrate(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table,
                        std::size_t n_games, RngStream& rng) {
  if (n_games == 0) throw std::invalid_argument("evaluate_winrate: n_games must be at least 1");
  const OpponentPool pool{OpponentMode::Cycling, 0};
  std::size_t wins = 0;
  for (std::size_t i = 0; i < n_games; ++i) {
    const Episode ep = play_episode(instructor, executor, table, sample_opponent(pool, i), rng);
    if (ep.outcome == Outcome::Win) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(n_games);
}

double interop_eval(const TabularAgent& foreign_instructor, const TabularAgent& executor, const AttackTable& table,
                    std::size_t n_games, RngStream& rng) {
  return evaluate_winrate(foreign_instructor, executor, table, n_games, rng);
}

double exact_winrate(const TabularAgent& instructor, const TabularAgent& executor, const AttackTable& table) {
  const Matrix5 ps = instructor.prob_matrix();
  const Matrix5 pl = executor.prob_matrix();
  double total = 0.0;
  for (UnitType opp : kAllUnits)
    for (int m = 0; m < kNumUnits; ++m)
      for (UnitType u : kAllUnits)
        if (resolve_combat(u, opp, table) == Outcome::Win) total += ps[index(opp)][m] * pl[m][index(u)];
  return total / kNumUnits;
}

}  // namespace driftlab::rts

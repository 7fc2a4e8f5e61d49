#include "driftlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "driftlab/errors.hpp"
#include "driftlab/flow.hpp"
#include "driftlab/metrics.hpp"
#include "driftlab/rts.hpp"
#include "driftlab/stochastic.hpp"

namespace driftlab {

namespace fs = std::filesystem;

namespace {

// Stream id reserved for permutation tests; seed streams use ids 0..n_seeds-1.
constexpr std::uint64_t kStatsStream = 0x5354415453ULL;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what, 0, key);
}

bool is_one_of(std::string_view value, std::initializer_list<std::string_view> options) {
  return std::find(options.begin(), options.end(), value) != options.end();
}

// ---------------------------------------------------------------- config I/O

double read_real(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

std::size_t read_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

bool read_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::vector<double> read_reals(const json& v, const std::string& key) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) fail(key, "expected a number or a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(read_real(x, key));
  return out;
}

std::vector<std::string> read_strings(const json& v, const std::string& key) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) fail(key, "expected a string or a list of strings");
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(read_string(x, key));
  return out;
}

struct Field {
  const char* key;
  std::function<void(const ExperimentConfig&, json&)> save;
  std::function<void(const json&, ExperimentConfig&)> load;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      {"experiment", [](const auto& c, json& j) { j["experiment"] = c.experiment; },
       [](const json& v, auto& c) { c.experiment = read_string(v, "experiment"); }},
      {"mode", [](const auto& c, json& j) { j["mode"] = to_string(c.mode); },
       [](const json& v, auto& c) {
         try {
           c.mode = parse_flow_mode(read_string(v, "mode"));
         } catch (const LookupError& e) {
           fail("mode", e.what());
         }
       }},
      {"sigma0", [](const auto& c, json& j) { j["sigma0"] = c.sigma0; },
       [](const json& v, auto& c) { c.sigma0 = read_reals(v, "sigma0"); }},
      {"lambda0", [](const auto& c, json& j) { j["lambda0"] = c.lambda0; },
       [](const json& v, auto& c) { c.lambda0 = read_reals(v, "lambda0"); }},
      {"game", [](const auto& c, json& j) { j["game"] = c.game; },
       [](const json& v, auto& c) { c.game = read_string(v, "game"); }},
      {"integrator", [](const auto& c, json& j) { j["integrator"] = c.integrator; },
       [](const json& v, auto& c) { c.integrator = read_string(v, "integrator"); }},
      {"dt", [](const auto& c, json& j) { j["dt"] = c.dt; },
       [](const json& v, auto& c) { c.dt = read_real(v, "dt"); }},
      {"horizon", [](const auto& c, json& j) { j["horizon"] = c.horizon; },
       [](const json& v, auto& c) { c.horizon = read_real(v, "horizon"); }},
      {"sample_stride", [](const auto& c, json& j) { j["sample_stride"] = c.sample_stride; },
       [](const json& v, auto& c) { c.sample_stride = read_count(v, "sample_stride"); }},
      {"resolution", [](const auto& c, json& j) { j["resolution"] = c.resolution; },
       [](const json& v, auto& c) { c.resolution = read_count(v, "resolution"); }},
      {"boundary_band", [](const auto& c, json& j) { j["boundary_band"] = c.boundary_band; },
       [](const json& v, auto& c) { c.boundary_band = read_real(v, "boundary_band"); }},
      {"learning_rate",
       [](const auto& c, json& j) {
         if (c.learning_rate) j["learning_rate"] = *c.learning_rate;
       },
       [](const json& v, auto& c) { c.learning_rate = read_real(v, "learning_rate"); }},
      {"episodes", [](const auto& c, json& j) { j["episodes"] = c.episodes; },
       [](const json& v, auto& c) { c.episodes = read_count(v, "episodes"); }},
      {"batch_size", [](const auto& c, json& j) { j["batch_size"] = c.batch_size; },
       [](const json& v, auto& c) { c.batch_size = read_count(v, "batch_size"); }},
      {"baseline",
       [](const auto& c, json& j) {
         if (c.baseline) j["baseline"] = *c.baseline;
       },
       [](const json& v, auto& c) { c.baseline = read_string(v, "baseline"); }},
      {"baseline_decay", [](const auto& c, json& j) { j["baseline_decay"] = c.baseline_decay; },
       [](const json& v, auto& c) { c.baseline_decay = read_real(v, "baseline_decay"); }},
      {"schedule", [](const auto& c, json& j) { j["schedule"] = c.schedule; },
       [](const json& v, auto& c) { c.schedule = read_string(v, "schedule"); }},
      {"estimator", [](const auto& c, json& j) { j["estimator"] = c.estimator; },
       [](const json& v, auto& c) { c.estimator = read_string(v, "estimator"); }},
      {"clip", [](const auto& c, json& j) { j["clip"] = c.clip; },
       [](const json& v, auto& c) { c.clip = read_real(v, "clip"); }},
      {"update_epochs", [](const auto& c, json& j) { j["update_epochs"] = c.update_epochs; },
       [](const json& v, auto& c) { c.update_epochs = read_count(v, "update_epochs"); }},
      {"opponents", [](const auto& c, json& j) { j["opponents"] = c.opponents; },
       [](const json& v, auto& c) { c.opponents = read_string(v, "opponents"); }},
      {"variants", [](const auto& c, json& j) { j["variants"] = c.variants; },
       [](const json& v, auto& c) { c.variants = read_strings(v, "variants"); }},
      {"bc_samples", [](const auto& c, json& j) { j["bc_samples"] = c.bc_samples; },
       [](const json& v, auto& c) { c.bc_samples = read_count(v, "bc_samples"); }},
      {"bc_noise", [](const auto& c, json& j) { j["bc_noise"] = c.bc_noise; },
       [](const json& v, auto& c) { c.bc_noise = read_real(v, "bc_noise"); }},
      {"bc_steps", [](const auto& c, json& j) { j["bc_steps"] = c.bc_steps; },
       [](const json& v, auto& c) { c.bc_steps = read_count(v, "bc_steps"); }},
      {"bc_learning_rate", [](const auto& c, json& j) { j["bc_learning_rate"] = c.bc_learning_rate; },
       [](const json& v, auto& c) { c.bc_learning_rate = read_real(v, "bc_learning_rate"); }},
      {"instructor_samples", [](const auto& c, json& j) { j["instructor_samples"] = c.instructor_samples; },
       [](const json& v, auto& c) { c.instructor_samples = read_count(v, "instructor_samples"); }},
      {"instructor_noise", [](const auto& c, json& j) { j["instructor_noise"] = c.instructor_noise; },
       [](const json& v, auto& c) { c.instructor_noise = read_real(v, "instructor_noise"); }},
      {"eval_games", [](const auto& c, json& j) { j["eval_games"] = c.eval_games; },
       [](const json& v, auto& c) { c.eval_games = read_count(v, "eval_games"); }},
      {"drift_samples", [](const auto& c, json& j) { j["drift_samples"] = c.drift_samples; },
       [](const json& v, auto& c) { c.drift_samples = read_count(v, "drift_samples"); }},
      {"n_perm", [](const auto& c, json& j) { j["n_perm"] = c.n_perm; },
       [](const json& v, auto& c) { c.n_perm = read_count(v, "n_perm"); }},
      {"alternative", [](const auto& c, json& j) { j["alternative"] = c.alternative; },
       [](const json& v, auto& c) { c.alternative = read_string(v, "alternative"); }},
      {"inputs", [](const auto& c, json& j) { j["inputs"] = c.inputs; },
       [](const json& v, auto& c) { c.inputs = read_strings(v, "inputs"); }},
      {"write_trajectories", [](const auto& c, json& j) { j["write_trajectories"] = c.write_trajectories; },
       [](const json& v, auto& c) { c.write_trajectories = read_bool(v, "write_trajectories"); }},
      {"master_seed", [](const auto& c, json& j) { j["master_seed"] = c.master_seed; },
       [](const json& v, auto& c) { c.master_seed = read_count(v, "master_seed"); }},
      {"n_seeds", [](const auto& c, json& j) { j["n_seeds"] = c.n_seeds; },
       [](const json& v, auto& c) { c.n_seeds = read_count(v, "n_seeds"); }},
      {"jobs", [](const auto& c, json& j) { j["jobs"] = c.jobs; },
       [](const json& v, auto& c) { c.jobs = static_cast<unsigned>(read_count(v, "jobs")); }},
      {"output_path", [](const auto& c, json& j) { j["output_path"] = c.output_path; },
       [](const json& v, auto& c) { c.output_path = read_string(v, "output_path"); }},
      {"output_format", [](const auto& c, json& j) { j["output_format"] = c.output_format; },
       [](const json& v, auto& c) { c.output_format = read_string(v, "output_format"); }},
  };
  return kFields;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// ---------------------------------------------------------------- outputs

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  std::ofstream open(const std::string& rel) {
    const fs::path path = root_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    files_.push_back(rel);
    return os;
  }

  void write_json(const std::string& rel, const json& j) {
    auto os = open(rel);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + (root_ / rel).string());
  }

  const fs::path& root() const { return root_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

// A flat table written as CSV or as a JSON array of objects.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

std::string csv_cell(const json& v) {
  if (v.is_number_float()) return format_number(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void write_table(OutputDir& out, const std::string& base, const Table& t, const std::string& format) {
  if (format == "json") {
    json arr = json::array();
    for (const auto& row : t.rows) {
      json obj = json::object();
      for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = row[i];
      arr.push_back(std::move(obj));
    }
    out.write_json(base + ".json", arr);
    return;
  }
  auto os = out.open(base + ".csv");
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << '\n';
  }
}

void write_trajectory(OutputDir& out, const std::string& base, const Trajectory& traj, const std::string& format) {
  if (format == "json") {
    out.write_json(base + ".json", to_json(traj));
  } else {
    auto os = out.open(base + ".csv");
    write_trajectory_csv(os, traj);
  }
}

void write_drift(OutputDir& out, const std::string& base, const DriftMatrix& m, const std::string& format) {
  if (format == "json") {
    out.write_json(base + ".json", to_json(m));
  } else {
    auto os = out.open(base + ".csv");
    write_drift_matrix_csv(os, m);
  }
}

std::string indexed(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / double(x.size());
}

// ---------------------------------------------------------------- flows

struct InitPair {
  double sigma0;
  double lambda0;
};

std::vector<InitPair> init_pairs(const ExperimentConfig& cfg) {
  std::vector<InitPair> out;
  for (double s : cfg.sigma0)
    for (double l : cfg.lambda0) out.push_back({s, l});
  return out;
}

std::string analytic_class(FlowMode mode, double sigma0, double lambda0) {
  return to_string(mode == FlowMode::Single ? classify_single(sigma0, lambda0) : classify_multitask(lambda0));
}

std::vector<std::string> final_columns(FlowMode mode) {
  if (mode == FlowMode::Single) return {"sigma_final", "lambda_final"};
  return {"sigma1_final", "sigma2_final", "lambda_final"};
}

void run_flow(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto inits = init_pairs(cfg);
  IntegratorConfig ic;
  ic.step = cfg.dt;
  ic.horizon = cfg.horizon;
  ic.sample_stride = cfg.sample_stride;
  std::vector<Trajectory> trajs(inits.size());
  parallel_for(inits.size(), cfg.jobs, [&](std::size_t i) {
    const auto x0 = initial_state(cfg.mode, inits[i].sigma0, inits[i].lambda0);
    if (cfg.integrator == "euler") {
      const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
      trajs[i] = discrete_gradient_ascent(x0, cfg.dt, steps, cfg.mode);
    } else {
      trajs[i] = integrate_clipped(x0, cfg.mode, ic);
    }
  });

  Table summary;
  summary.columns = {"run", "sigma0", "lambda0", "analytic_class", "terminal_class", "t_final"};
  for (const auto& c : final_columns(cfg.mode)) summary.columns.push_back(c);
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    write_trajectory(out, indexed("flow_", i), trajs[i], cfg.output_format);
    std::vector<json> row = {i,
                             inits[i].sigma0,
                             inits[i].lambda0,
                             analytic_class(cfg.mode, inits[i].sigma0, inits[i].lambda0),
                             to_string(trajs[i].terminal_class),
                             trajs[i].times.back()};
    for (double v : trajs[i].final_state()) row.emplace_back(v);
    summary.rows.push_back(std::move(row));
    ++counts[to_string(trajs[i].terminal_class)];
  }
  write_table(out, "flow_summary", summary, cfg.output_format);
  manifest.results["runs"] = inits.size();
  manifest.results["terminal_classes"] = counts;
}

void run_sweep(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  IntegratorConfig ic;
  ic.step = cfg.dt;
  ic.horizon = cfg.horizon;
  const auto cells = phase_sweep(cfg.resolution, cfg.mode, ic, {cfg.boundary_band, cfg.jobs});
  if (cfg.output_format == "json") {
    out.write_json("sweep.json", to_json(cells));
  } else {
    auto os = out.open("sweep.csv");
    write_sweep_csv(os, cells);
  }
  std::size_t band = 0;
  std::size_t disagree = 0;
  std::size_t drifted = 0;
  double worst_terminal = 0.0;
  for (const auto& c : cells) {
    band += c.boundary_band;
    disagree += !c.agree;
    drifted += c.numeric == DriftClass::Drifted;
    if (!c.boundary_band) {
      const double d = std::min({std::abs(c.lambda_final), std::abs(c.lambda_final - 0.5),
                                 std::abs(c.lambda_final - 1.0)});
      worst_terminal = std::max(worst_terminal, d);
    }
  }
  manifest.results = {{"cells", cells.size()},
                      {"boundary_band_cells", band},
                      {"disagreements", disagree},
                      {"drifted_cells", drifted},
                      {"max_terminal_lambda_deviation", worst_terminal}};
}

// Per-run rows: seed, step, state, mean reward of the batch that produced the
// state (empty for the initial state).
void write_sgd_run(OutputDir& out, const std::string& base, std::size_t seed, const TrainResult& r,
                   const std::string& format) {
  Table t;
  t.columns = {"seed", "step"};
  for (const auto& c : r.trajectory.mode == FlowMode::Single ? std::vector<std::string>{"sigma", "lambda"}
                                                              : std::vector<std::string>{"sigma1", "sigma2", "lambda"}) {
    t.columns.push_back(c);
  }
  t.columns.push_back("batch_mean_reward");
  for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
    std::vector<json> row = {seed, k};
    for (double v : r.trajectory.states[k]) row.emplace_back(v);
    row.emplace_back(k == 0 ? json("") : json(r.batch_mean_reward[k - 1]));
    t.rows.push_back(std::move(row));
  }
  write_table(out, base, t, format);
}

void run_sgd(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto inits = init_pairs(cfg);
  TrainConfig tc;
  tc.learning_rate = cfg.resolved_learning_rate();
  tc.episodes = cfg.episodes;
  tc.batch_size = cfg.batch_size;
  tc.baseline = {cfg.resolved_baseline() == "none" ? BaselineKind::None : BaselineKind::MovingAverage,
                 cfg.baseline_decay};
  tc.schedule = cfg.schedule == "sampled" ? TaskSchedule::Sampled : TaskSchedule::RoundRobin;

  const std::size_t n = cfg.n_seeds * inits.size();
  std::vector<TrainResult> results(n);
  parallel_for(n, cfg.jobs, [&](std::size_t k) {
    const std::size_t seed = k / inits.size();
    const std::size_t c = k % inits.size();
    RngStream rng = RngStream(cfg.master_seed, seed).derive(c);
    const auto& x = inits[c];
    if (cfg.mode == FlowMode::Single) {
      results[k] = sgd_train({x.sigma0, x.lambda0}, game_preset(cfg.game), tc, rng);
    } else {
      results[k] = multitask_sgd_train({x.sigma0, x.sigma0, x.lambda0},
                                       {SignalingGame::match(), SignalingGame::prime_match()}, tc, rng);
    }
  });

  const bool has_analytic = cfg.mode == FlowMode::Multitask || cfg.game == "R";
  Table summary;
  summary.columns = {"seed", "sigma0", "lambda0", "analytic_class", "terminal_class", "final_batch_reward"};
  for (const auto& c : final_columns(cfg.mode)) summary.columns.push_back(c);
  std::vector<std::map<std::string, std::size_t>> votes(inits.size());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t seed = k / inits.size();
    const std::size_t c = k % inits.size();
    const auto& r = results[k];
    if (cfg.write_trajectories) {
      write_sgd_run(out, "sgd/" + indexed("seed", seed) + indexed("_init", c), seed, r, cfg.output_format);
    }
    std::vector<json> row = {seed,
                             inits[c].sigma0,
                             inits[c].lambda0,
                             has_analytic ? analytic_class(cfg.mode, inits[c].sigma0, inits[c].lambda0) : "",
                             to_string(r.trajectory.terminal_class),
                             r.batch_mean_reward.empty() ? 0.0 : r.batch_mean_reward.back()};
    for (double v : r.trajectory.final_state()) row.emplace_back(v);
    summary.rows.push_back(std::move(row));
    ++votes[c][to_string(r.trajectory.terminal_class)];
  }
  write_table(out, "sgd_summary", summary, cfg.output_format);

  json per_init = json::array();
  for (std::size_t c = 0; c < inits.size(); ++c) {
    std::string majority;
    std::size_t best = 0;
    for (const auto& [cls, count] : votes[c]) {
      if (count > best) {
        best = count;
        majority = cls;
      }
    }
    per_init.push_back({{"sigma0", inits[c].sigma0},
                        {"lambda0", inits[c].lambda0},
                        {"analytic_class",
                         has_analytic ? analytic_class(cfg.mode, inits[c].sigma0, inits[c].lambda0) : ""},
                        {"majority_class", majority},
                        {"counts", votes[c]}});
  }
  manifest.results["inits"] = per_init;
  manifest.budget["episodes_per_run"] = cfg.episodes;
}

// ---------------------------------------------------------------- RTS

rts::RlConfig rl_config(const ExperimentConfig& cfg) {
  rts::RlConfig rl;
  rl.episodes = cfg.episodes;
  rl.batch_size = cfg.batch_size;
  rl.learning_rate = cfg.resolved_learning_rate();
  rl.estimator = cfg.estimator == "clipped-surrogate" ? rts::Estimator::ClippedSurrogate : rts::Estimator::Reinforce;
  const std::string b = cfg.resolved_baseline();
  rl.baseline = b == "none"         ? rts::RlBaseline::None
                : b == "batch-mean" ? rts::RlBaseline::BatchMean
                                    : rts::RlBaseline::MovingAverage;
  rl.baseline_decay = cfg.baseline_decay;
  rl.clip = cfg.clip;
  rl.update_epochs = cfg.update_epochs;
  rl.opponents = cfg.opponents == "sampled" ? rts::OpponentMode::Sampled : rts::OpponentMode::Cycling;
  rl.sample_environments = cfg.schedule == "sampled";
  return rl;
}

std::vector<rts::AttackTable> tables_of(const ExperimentConfig& cfg) {
  std::vector<rts::AttackTable> out;
  for (const auto& v : cfg.variants) out.push_back(rts::load_attack_table(v));
  return out;
}

// BC executor from a (moderately noisy) demonstration set and a weak BC
// instructor from a small noisy one, both on `base`.
rts::BCAgents init_agents(const ExperimentConfig& cfg, const rts::AttackTable& base, const RngStream& root) {
  RngStream r1 = root.derive(1);
  RngStream r2 = root.derive(2);
  rts::BCAgents out;
  out.executor = rts::bc_train(rts::bc_generate(base, cfg.bc_samples, cfg.bc_noise, r1), cfg.bc_steps,
                               cfg.bc_learning_rate)
                     .executor;
  out.instructor = rts::bc_train(rts::bc_generate(base, cfg.instructor_samples, cfg.instructor_noise, r2),
                                 cfg.bc_steps, cfg.bc_learning_rate)
                       .instructor;
  return out;
}

double exact_off_diagonal(const rts::TabularAgent& executor) {
  return off_diagonal_mass(exact_drift_matrix(executor.prob_matrix()));
}

std::string offending_units(const DriftFlag& flag) {
  std::string s;
  for (std::size_t i : flag.offending) {
    if (!s.empty()) s += ' ';
    s += rts::unit_name(rts::unit_from_index(int(i)));
  }
  return s;
}

// Agent files hold {"instructors": {variant: agent, ...}, "executor": agent}.
struct AgentFile {
  std::vector<std::pair<std::string, rts::TabularAgent>> instructors;
  rts::TabularAgent executor{rts::Role::Executor};

  const rts::TabularAgent& instructor_for(const std::string& variant) const {
    for (const auto& [v, a] : instructors)
      if (v == variant) return a;
    return instructors.front().second;
  }
};

json agent_file_json(const std::vector<std::pair<std::string, rts::TabularAgent>>& instructors,
                     const rts::TabularAgent& executor) {
  json ins = json::object();
  for (const auto& [v, a] : instructors) ins[v] = to_json(a);
  return {{"instructors", ins}, {"executor", to_json(executor)}};
}

AgentFile load_agent_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read agent file " + path);
  const json j = json::parse(is);
  AgentFile f;
  for (const auto& [v, a] : j.at("instructors").items()) f.instructors.emplace_back(v, agent_from_json(a));
  if (f.instructors.empty()) throw std::runtime_error(path + ": no instructors");
  f.executor = agent_from_json(j.at("executor"));
  return f;
}

void run_rts_bc(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto tables = tables_of(cfg);
  const std::size_t n = cfg.n_seeds * tables.size();
  std::vector<rts::BCAgents> agents(n);
  std::vector<double> winrates(n);
  parallel_for(n, cfg.jobs, [&](std::size_t k) {
    const RngStream root = RngStream(cfg.master_seed, k / tables.size()).derive(k % tables.size());
    RngStream data_rng = root.derive(1);
    RngStream eval_rng = root.derive(2);
    const auto& table = tables[k % tables.size()];
    agents[k] = rts::bc_train(rts::bc_generate(table, cfg.bc_samples, cfg.bc_noise, data_rng), cfg.bc_steps,
                              cfg.bc_learning_rate);
    winrates[k] = rts::evaluate_winrate(agents[k].instructor, agents[k].executor, table, cfg.eval_games, eval_rng);
  });
  Table summary;
  summary.columns = {"seed", "variant", "winrate", "exact_winrate", "min_executor_diagonal", "executor_drifted"};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t seed = k / tables.size();
    const auto& table = tables[k % tables.size()];
    json j = agent_file_json({{table.variant, agents[k].instructor}}, agents[k].executor);
    j["samples"] = cfg.bc_samples;
    j["noise_rate"] = cfg.bc_noise;
    out.write_json("bc/" + indexed("seed", seed) + "_" + table.variant + ".json", j);
    const auto flag = executor_drift_flag(agents[k].executor);
    summary.rows.push_back({seed, table.variant, winrates[k],
                            rts::exact_winrate(agents[k].instructor, agents[k].executor, table),
                            *std::min_element(flag.diagonal.begin(), flag.diagonal.end()), flag.drifted});
  }
  write_table(out, "bc_summary", summary, cfg.output_format);
  manifest.budget["bc_samples"] = cfg.bc_samples;
}

void write_log(OutputDir& out, const std::string& base, const rts::TrainingLog& log, const std::string& format) {
  if (format == "json") {
    json arr = json::array();
    for (const auto& r : log.rows) {
      arr.push_back({{"episode", r.episode},
                     {"variant", r.variant},
                     {"win", r.win},
                     {"reward", r.reward},
                     {"diag_mass", r.diag_mass}});
    }
    out.write_json(base + ".json", arr);
  } else {
    auto os = out.open(base + ".csv");
    write_training_log_csv(os, log);
  }
}

void run_rts_train(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto tables = tables_of(cfg);
  const auto rl = rl_config(cfg);
  struct SeedResult {
    std::vector<std::pair<std::string, rts::TabularAgent>> instructors;
    rts::TabularAgent executor{rts::Role::Executor};
    rts::TrainingLog log;
    std::vector<double> winrates;
  };
  std::vector<SeedResult> results(cfg.n_seeds);
  parallel_for(cfg.n_seeds, cfg.jobs, [&](std::size_t seed) {
    const RngStream root(cfg.master_seed, seed);
    const auto init = init_agents(cfg, tables.front(), root);
    RngStream train_rng = root.derive(3);
    SeedResult& r = results[seed];
    if (cfg.mode == FlowMode::Single) {
      auto res = rts::rl_finetune_single(init, tables.front(), rl, train_rng);
      r.instructors = {{tables.front().variant, res.agents.instructor}};
      r.executor = res.agents.executor;
      r.log = std::move(res.log);
    } else {
      auto res = rts::rl_finetune_multitask(init.instructor, init.executor, tables, rl, train_rng);
      for (std::size_t k = 0; k < tables.size(); ++k) r.instructors.emplace_back(tables[k].variant, res.instructors[k]);
      r.executor = res.executor;
      r.log = std::move(res.log);
    }
    for (std::size_t k = 0; k < r.instructors.size(); ++k) {
      RngStream eval_rng = root.derive(5).derive(k);
      r.winrates.push_back(rts::evaluate_winrate(r.instructors[k].second, r.executor, tables[k], cfg.eval_games,
                                                 eval_rng));
    }
  });
  Table summary;
  summary.columns = {"seed", "variant", "winrate", "exact_winrate", "off_diagonal_mass", "executor_drifted",
                     "offending_messages"};
  for (std::size_t seed = 0; seed < cfg.n_seeds; ++seed) {
    const auto& r = results[seed];
    out.write_json("train/" + indexed("seed", seed) + "_agents.json", agent_file_json(r.instructors, r.executor));
    write_log(out, "train/" + indexed("seed", seed) + "_log", r.log, cfg.output_format);
    const auto flag = executor_drift_flag(r.executor);
    for (std::size_t k = 0; k < r.instructors.size(); ++k) {
      summary.rows.push_back({seed, r.instructors[k].first, r.winrates[k],
                              rts::exact_winrate(r.instructors[k].second, r.executor, tables[k]),
                              exact_off_diagonal(r.executor), flag.drifted, offending_units(flag)});
    }
  }
  write_table(out, "train_summary", summary, cfg.output_format);
  manifest.budget["mode"] = to_string(cfg.mode);
  manifest.budget["episodes_per_environment"] = results.front().log.episodes_per_environment;
}

void run_rts_eval(const ExperimentConfig& cfg, OutputDir& out, RunManifest&) {
  const auto tables = tables_of(cfg);
  Table summary;
  summary.columns = {"input", "variant", "winrate", "exact_winrate"};
  for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
    const AgentFile f = load_agent_file(cfg.inputs[i]);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      RngStream rng = RngStream(cfg.master_seed, i).derive(k);
      const auto& instr = f.instructor_for(tables[k].variant);
      summary.rows.push_back({cfg.inputs[i], tables[k].variant,
                              rts::evaluate_winrate(instr, f.executor, tables[k], cfg.eval_games, rng),
                              rts::exact_winrate(instr, f.executor, tables[k])});
    }
  }
  write_table(out, "eval_summary", summary, cfg.output_format);
}

void run_interop(const ExperimentConfig& cfg, OutputDir& out, RunManifest&) {
  const auto tables = tables_of(cfg);
  const AgentFile source = load_agent_file(cfg.inputs.front());
  Table summary;
  summary.columns = {"instructor_input", "executor_input", "variant", "winrate", "exact_winrate"};
  for (std::size_t i = 1; i < cfg.inputs.size(); ++i) {
    const AgentFile f = load_agent_file(cfg.inputs[i]);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      RngStream rng = RngStream(cfg.master_seed, i).derive(k);
      const auto& instr = source.instructor_for(tables[k].variant);
      summary.rows.push_back({cfg.inputs.front(), cfg.inputs[i], tables[k].variant,
                              rts::interop_eval(instr, f.executor, tables[k], cfg.eval_games, rng),
                              rts::exact_winrate(instr, f.executor, tables[k])});
    }
  }
  write_table(out, "interop_summary", summary, cfg.output_format);
}

void run_drift_inputs(const ExperimentConfig& cfg, OutputDir& out) {
  Table summary;
  summary.columns = {"input", "off_diagonal_mass", "exact_off_diagonal_mass", "executor_drifted",
                     "offending_messages"};
  for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
    const AgentFile f = load_agent_file(cfg.inputs[i]);
    RngStream rng(cfg.master_seed, i);
    const auto m = drift_matrix(f.executor, {}, cfg.drift_samples, rng);
    write_drift(out, indexed("drift_", i), m, cfg.output_format);
    const auto flag = executor_drift_flag(f.executor);
    summary.rows.push_back(
        {cfg.inputs[i], off_diagonal_mass(m), exact_off_diagonal(f.executor), flag.drifted, offending_units(flag)});
  }
  write_table(out, "drift_summary", summary, cfg.output_format);
}

// Paired-seed comparison: single-task training on the first variant versus
// multitask training on all variants, from the same initial agents and with
// the same episode budget per environment.
void run_drift_comparison(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto tables = tables_of(cfg);
  const auto rl = rl_config(cfg);
  const auto& base = tables.front();
  struct Pair {
    DriftMatrix single_matrix;
    DriftMatrix multi_matrix;
    double single_interop = 0.0;
    double multi_interop = 0.0;
    double single_winrate = 0.0;
    double multi_winrate = 0.0;
    std::map<std::string, std::size_t> single_budget;
    std::map<std::string, std::size_t> multi_budget;
  };
  std::vector<Pair> pairs(cfg.n_seeds);
  parallel_for(cfg.n_seeds, cfg.jobs, [&](std::size_t seed) {
    const RngStream root(cfg.master_seed, seed);
    const auto init = init_agents(cfg, base, root);
    RngStream single_rng = root.derive(3);
    RngStream multi_rng = root.derive(4);
    const auto single = rts::rl_finetune_single(init, base, rl, single_rng);
    const auto multi = rts::rl_finetune_multitask(init.instructor, init.executor, tables, rl, multi_rng);

    RngStream bc_rng = root.derive(7);
    const auto bc_instructor =
        rts::bc_train(rts::bc_generate(base, cfg.bc_samples, 0.0, bc_rng), cfg.bc_steps, cfg.bc_learning_rate)
            .instructor;

    // Both executors see the same message and game streams.
    Pair& p = pairs[seed];
    RngStream m1 = root.derive(6);
    RngStream m2 = root.derive(6);
    p.single_matrix = drift_matrix(single.agents.executor, {}, cfg.drift_samples, m1);
    p.multi_matrix = drift_matrix(multi.executor, {}, cfg.drift_samples, m2);
    RngStream i1 = root.derive(8);
    RngStream i2 = root.derive(8);
    p.single_interop = rts::interop_eval(bc_instructor, single.agents.executor, base, cfg.eval_games, i1);
    p.multi_interop = rts::interop_eval(bc_instructor, multi.executor, base, cfg.eval_games, i2);
    RngStream w1 = root.derive(9);
    RngStream w2 = root.derive(9);
    p.single_winrate =
        rts::evaluate_winrate(single.agents.instructor, single.agents.executor, base, cfg.eval_games, w1);
    p.multi_winrate = rts::evaluate_winrate(multi.instructors.front(), multi.executor, base, cfg.eval_games, w2);
    p.single_budget = single.log.episodes_per_environment;
    p.multi_budget = multi.log.episodes_per_environment;
  });

  Table rows;
  rows.columns = {"seed",           "single_off_diagonal", "multi_off_diagonal", "single_interop",
                  "multi_interop",  "single_winrate",      "multi_winrate"};
  std::vector<double> single_mass, multi_mass, single_interop, multi_interop;
  bool parity = true;
  for (std::size_t seed = 0; seed < cfg.n_seeds; ++seed) {
    const auto& p = pairs[seed];
    write_drift(out, "drift/" + indexed("seed", seed) + "_single", p.single_matrix, cfg.output_format);
    write_drift(out, "drift/" + indexed("seed", seed) + "_multi", p.multi_matrix, cfg.output_format);
    single_mass.push_back(off_diagonal_mass(p.single_matrix));
    multi_mass.push_back(off_diagonal_mass(p.multi_matrix));
    single_interop.push_back(p.single_interop);
    multi_interop.push_back(p.multi_interop);
    rows.rows.push_back({seed, single_mass.back(), multi_mass.back(), p.single_interop, p.multi_interop,
                         p.single_winrate, p.multi_winrate});
    for (const auto& [variant, count] : p.multi_budget) parity = parity && count == p.single_budget.at(base.variant);
  }
  write_table(out, "drift_pairs", rows, cfg.output_format);

  RngStream stats(cfg.master_seed, kStatsStream);
  const auto mass_test = permutation_test(single_mass, multi_mass, cfg.n_perm, Alternative::Greater, stats);
  const auto interop_test = permutation_test(multi_interop, single_interop, cfg.n_perm, Alternative::Greater, stats);
  const json comparison = {
      {"seeds", cfg.n_seeds},
      {"off_diagonal_mass",
       {{"mean_single", mean_of(single_mass)},
        {"mean_multi", mean_of(multi_mass)},
        {"test_single_greater", to_json(mass_test)}}},
      {"interop_winrate",
       {{"mean_single", mean_of(single_interop)},
        {"mean_multi", mean_of(multi_interop)},
        {"test_multi_greater", to_json(interop_test)}}}};
  out.write_json("comparison.json", comparison);
  manifest.results = comparison;
  manifest.budget = {{"single", pairs.front().single_budget},
                     {"multitask", pairs.front().multi_budget},
                     {"parity", parity}};
  if (!parity) throw std::logic_error("episode budgets differ between single-task and multitask runs");
}

void run_drift(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  if (cfg.inputs.empty()) {
    run_drift_comparison(cfg, out, manifest);
  } else {
    run_drift_inputs(cfg, out);
  }
}

std::vector<double> read_samples(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  auto v = read_numeric_column(is);
  if (v.empty()) throw std::runtime_error(path + ": no samples");
  return v;
}

void run_permtest(const ExperimentConfig& cfg, OutputDir& out, RunManifest& manifest) {
  const auto a = read_samples(cfg.inputs[0]);
  const auto b = read_samples(cfg.inputs[1]);
  RngStream rng(cfg.master_seed, kStatsStream);
  const auto result = permutation_test(a, b, cfg.n_perm, parse_alternative(cfg.alternative), rng);
  json j = to_json(result);
  j["mean_a"] = mean_of(a);
  j["mean_b"] = mean_of(b);
  j["n_a"] = a.size();
  j["n_b"] = b.size();
  if (cfg.output_format == "json") {
    out.write_json("permtest.json", j);
  } else {
    Table t;
    t.columns = {"statistic", "p_value", "n_permutations", "alternative", "mean_a", "mean_b", "n_a", "n_b"};
    t.rows.push_back({j["statistic"], j["p_value"], j["n_permutations"], j["alternative"], j["mean_a"], j["mean_b"],
                      j["n_a"], j["n_b"]});
    write_table(out, "permtest", t, "csv");
  }
  manifest.results = j;
}

}  // namespace

// ---------------------------------------------------------------- public

double ExperimentConfig::resolved_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return experiment == "sgd" ? 0.05 : 0.5;
}

std::string ExperimentConfig::resolved_baseline() const {
  if (baseline) return *baseline;
  return experiment == "sgd" ? "none" : "moving-average";
}

void ExperimentConfig::validate() const {
  if (std::find_if(kExperiments.begin(), kExperiments.end(), [&](const char* e) { return experiment == e; }) ==
      kExperiments.end()) {
    fail("experiment", "unknown experiment '" + experiment + "'");
  }
  const bool flow_like = experiment == "flow" || experiment == "sgd";
  if (flow_like) {
    if (sigma0.empty()) fail("sigma0", "at least one value required");
    if (lambda0.empty()) fail("lambda0", "at least one value required");
    for (double s : sigma0)
      if (!(s > 0.0 && s < 1.0)) fail("sigma0", "values must lie in (0, 1)");
    for (double l : lambda0)
      if (!(l > 0.0 && l < 1.0)) fail("lambda0", "values must lie in (0, 1)");
  }
  if (!is_one_of(integrator, {"rk4", "euler"})) fail("integrator", "expected rk4 or euler");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt", "must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) fail("horizon", "must be positive");
  if (sample_stride == 0) fail("sample_stride", "must be at least 1");
  if (resolution == 0) fail("resolution", "must be at least 1");
  if (!(boundary_band >= 0.0)) fail("boundary_band", "must be nonnegative");
  if (learning_rate && !(*learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be at least 1");
  if (baseline) {
    const bool ok = experiment == "sgd" ? is_one_of(*baseline, {"none", "moving-average"})
                                        : is_one_of(*baseline, {"none", "moving-average", "batch-mean"});
    if (!ok) fail("baseline", "unknown baseline '" + *baseline + "'");
  }
  if (!(baseline_decay > 0.0 && baseline_decay < 1.0)) fail("baseline_decay", "must lie in (0, 1)");
  if (!is_one_of(schedule, {"round-robin", "sampled"})) fail("schedule", "expected round-robin or sampled");
  if (!is_one_of(estimator, {"reinforce", "clipped-surrogate"})) {
    fail("estimator", "expected reinforce or clipped-surrogate");
  }
  if (!(clip > 0.0)) fail("clip", "must be positive");
  if (update_epochs == 0) fail("update_epochs", "must be at least 1");
  if (!is_one_of(opponents, {"cycling", "sampled"})) fail("opponents", "expected cycling or sampled");
  if (experiment == "sgd" && mode == FlowMode::Single) {
    try {
      game_preset(game);
    } catch (const LookupError&) {
      fail("game", "unknown game '" + game + "' (expected R or Rprime)");
    }
  }
  if (variants.empty()) fail("variants", "at least one variant required");
  for (const auto& v : variants) {
    try {
      rts::parse_variant(v);
    } catch (const LookupError&) {
      fail("variants", "unknown variant '" + v + "'");
    }
  }
  if (bc_samples == 0) fail("bc_samples", "must be at least 1");
  if (instructor_samples == 0) fail("instructor_samples", "must be at least 1");
  if (!(bc_noise >= 0.0 && bc_noise < 0.5)) fail("bc_noise", "must lie in [0, 0.5)");
  if (!(instructor_noise >= 0.0 && instructor_noise < 0.5)) fail("instructor_noise", "must lie in [0, 0.5)");
  if (!(bc_learning_rate > 0.0)) fail("bc_learning_rate", "must be positive");
  if (eval_games == 0) fail("eval_games", "must be at least 1");
  if (drift_samples == 0) fail("drift_samples", "must be at least 1");
  if (n_perm < 1000) fail("n_perm", "must be at least 1000");
  try {
    parse_alternative(alternative);
  } catch (const LookupError&) {
    fail("alternative", "expected two-sided, greater or less");
  }
  if (n_seeds == 0) fail("n_seeds", "must be at least 1");
  if (jobs == 0) fail("jobs", "must be at least 1");
  if (output_path.empty()) fail("output_path", "must not be empty");
  if (!is_one_of(output_format, {"csv", "json"})) fail("output_format", "expected csv or json");

  if (experiment == "rts-train") {
    if (mode == FlowMode::Single && variants.size() != 1) {
      fail("variants", "single-task training takes exactly one variant");
    }
    if (mode == FlowMode::Multitask && variants.size() < 2) {
      fail("variants", "multitask training needs at least two variants");
    }
  }
  if (experiment == "drift" && inputs.empty() && variants.size() < 2) {
    fail("variants", "the drift comparison needs at least two variants (the first is the single-task one)");
  }
  if (experiment == "rts-eval" && inputs.empty()) fail("inputs", "at least one agent file required");
  if (experiment == "interop" && inputs.size() < 2) {
    fail("inputs", "expected an instructor file followed by one or more executor files");
  }
  if (experiment == "permtest" && inputs.size() != 2) fail("inputs", "expected exactly two sample files");
}

json to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& f : fields()) f.save(cfg, j);
  return j;
}

int key_line(std::string_view source, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  std::size_t pos = 0;
  while ((pos = source.find(quoted, pos)) != std::string_view::npos) {
    const std::size_t after = source.find_first_not_of(" \t\r\n", pos + quoted.size());
    if (after != std::string_view::npos && source[after] == ':') return line_of_offset(source, pos);
    pos += quoted.size();
  }
  return 0;
}

ExperimentConfig config_from_json(const json& j, std::string_view source) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", 1);
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const auto& all = fields();
    const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return key == f.key; });
    if (it == all.end()) throw ConfigError("unknown key '" + key + "'", key_line(source, key), key);
    try {
      it->load(value, cfg);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), key_line(source, key), key);
    }
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  ExperimentConfig cfg = config_from_json(j, text);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), key_line(text, e.key()), e.key());
  }
  return cfg;
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig cfg;
  if (name == "prop1-grid") {
    cfg.experiment = "sweep";
    cfg.mode = FlowMode::Single;
    cfg.resolution = 101;
    cfg.boundary_band = 1e-3;
    cfg.output_path = "prop1-grid";
  } else if (name == "prop2-independence") {
    cfg.experiment = "flow";
    cfg.mode = FlowMode::Multitask;
    cfg.sigma0 = {0.05, 0.3, 0.5, 0.95};
    cfg.lambda0 = {0.7};
    cfg.output_path = "prop2-independence";
  } else if (name == "rts-drift-comparison") {
    cfg.experiment = "drift";
    cfg.variants = {"Original", "B", "C"};
    cfg.n_seeds = 20;
    cfg.episodes = 20000;
    cfg.output_path = "rts-drift-comparison";
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'", 0, "preset");
  }
  return cfg;
}

void apply_seed_env(ExperimentConfig& cfg, const char* env_value) {
  if (env_value == nullptr || *env_value == '\0') return;
  const std::string_view s(env_value);
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("DRIFTLAB_SEED must be an unsigned integer, got '" + std::string(s) + "'", 0, "master_seed");
  }
  cfg.master_seed = seed;
}

json to_json(const RunManifest& manifest) {
  return {{"tool", "driftlab"},
          {"version", manifest.version},
          {"config", manifest.config},
          {"wall_clock_seconds", manifest.wall_clock_seconds},
          {"outputs", manifest.outputs},
          {"budget", manifest.budget},
          {"results", manifest.results}};
}

RunManifest run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config = to_json(cfg);
  manifest.version = kVersion;
  OutputDir out(cfg.output_path);

  if (cfg.experiment == "flow") {
    run_flow(cfg, out, manifest);
  } else if (cfg.experiment == "sweep") {
    run_sweep(cfg, out, manifest);
  } else if (cfg.experiment == "sgd") {
    run_sgd(cfg, out, manifest);
  } else if (cfg.experiment == "rts-bc") {
    run_rts_bc(cfg, out, manifest);
  } else if (cfg.experiment == "rts-train") {
    run_rts_train(cfg, out, manifest);
  } else if (cfg.experiment == "rts-eval") {
    run_rts_eval(cfg, out, manifest);
  } else if (cfg.experiment == "interop") {
    run_interop(cfg, out, manifest);
  } else if (cfg.experiment == "drift") {
    run_drift(cfg, out, manifest);
  } else {
    run_permtest(cfg, out, manifest);
  }

  manifest.outputs = out.files();
  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream os(out.root() / "manifest.json", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest.json");
  os << to_json(manifest).dump(2) << '\n';
  return manifest;
}

int run_and_report(const ExperimentConfig& cfg, std::ostream& err, std::string_view source_text) {
  try {
    run(cfg);
    return 0;
  } catch (const ConfigError& e) {
    int line = e.line();
    if (line == 0 && !e.key().empty()) line = key_line(source_text, e.key());
    err << "config error";
    if (line > 0) err << " (line " << line << ")";
    err << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace driftlab

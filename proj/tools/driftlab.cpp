#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftlab/errors.hpp"
#include "driftlab/experiment.hpp"

namespace {

template <typename T>
void set_if(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

}  // namespace

int main(int argc, char** argv) {
  using driftlab::ExperimentConfig;

  CLI::App app{"Semantic drift experiments: signaling-game gradient flows, stochastic training and a tabular RTS "
               "instruction game."};
  app.set_version_flag("--version", std::string("driftlab ") + driftlab::kVersion);

  std::optional<std::string> experiment;
  std::optional<std::string> experiment_flag;
  std::optional<std::string> config_path;
  std::optional<std::string> preset_name;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::vector<double> sigma0;
  std::vector<double> lambda0;
  std::optional<std::string> game, integrator, baseline, schedule, estimator, opponents, alternative;
  std::optional<double> dt, horizon, band, lr, baseline_decay, clip, bc_noise, bc_lr, instructor_noise;
  std::optional<std::size_t> stride, resolution, episodes, batch_size, epochs, bc_samples, bc_steps,
      instructor_samples, eval_games, drift_samples, n_perm, n_seeds;
  std::vector<std::string> variants;
  std::vector<std::string> inputs;
  std::optional<std::string> input_a, input_b;
  bool no_trajectories = false;
  bool list_presets = false;

  app.add_option("EXPERIMENT", experiment, "flow, sweep, sgd, rts-bc, rts-train, rts-eval, interop, drift, permtest");
  app.add_option("--experiment", experiment_flag, "Experiment to run (alternative to the positional form)");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--preset", preset_name, "prop1-grid, prop2-independence or rts-drift-comparison");
  app.add_flag("--list-presets", list_presets, "Print the preset names and exit");
  app.add_option("--mode", mode, "single or multitask");
  app.add_option("--seed", seed, "Master seed (overrides DRIFTLAB_SEED and the config)");
  app.add_option("--jobs", jobs, "Worker threads; outputs do not depend on it");
  app.add_option("--out", out, "Output directory");
  app.add_option("--format", format, "csv or json");

  app.add_option("--sigma0", sigma0, "Initial instructor parameter(s)")->delimiter(',');
  app.add_option("--lambda0", lambda0, "Initial executor parameter(s)")->delimiter(',');
  app.add_option("--game", game, "Signaling game preset for single-task sgd (R or Rprime)");
  app.add_option("--integrator", integrator, "rk4 or euler");
  app.add_option("--dt", dt, "Integration step or gradient-ascent step size");
  app.add_option("--horizon", horizon, "Integration horizon");
  app.add_option("--stride", stride, "Record every n-th integration step");
  app.add_option("--resolution", resolution, "Sweep grid size per axis");
  app.add_option("--band", band, "Sweep boundary band half-width");

  app.add_option("--lr", lr, "Learning rate (default 0.05 for sgd, 0.5 for RTS training)");
  app.add_option("--episodes", episodes, "Training episodes (per environment for RTS runs)");
  app.add_option("--batch-size", batch_size, "Episodes per update");
  app.add_option("--baseline", baseline, "none, moving-average or batch-mean");
  app.add_option("--baseline-decay", baseline_decay, "Moving-average baseline decay");
  app.add_option("--schedule", schedule, "Multitask task order: round-robin or sampled");
  app.add_option("--estimator", estimator, "reinforce or clipped-surrogate");
  app.add_option("--clip", clip, "Clipped-surrogate ratio bound");
  app.add_option("--epochs", epochs, "Clipped-surrogate update epochs per batch");
  app.add_option("--opponents", opponents, "cycling or sampled");

  app.add_option("--variants", variants, "Game variants (Original, B..J)")->delimiter(',');
  app.add_option("--bc-samples", bc_samples, "Behavior-cloning demonstrations for the executor");
  app.add_option("--bc-noise", bc_noise, "Behavior-cloning demonstration noise rate");
  app.add_option("--bc-steps", bc_steps, "Behavior-cloning gradient steps");
  app.add_option("--bc-lr", bc_lr, "Behavior-cloning learning rate");
  app.add_option("--instructor-samples", instructor_samples, "Demonstrations for the weak instructor");
  app.add_option("--instructor-noise", instructor_noise, "Noise rate of the weak instructor's demonstrations");
  app.add_option("--eval-games", eval_games, "Games per win-rate evaluation");
  app.add_option("--drift-samples", drift_samples, "Messages sampled per drift matrix");

  app.add_option("--n-perm", n_perm, "Permutations per test (at least 1000)");
  app.add_option("--alternative", alternative, "two-sided, greater or less");
  app.add_option("--a", input_a, "First sample file (permtest)");
  app.add_option("--b", input_b, "Second sample file (permtest)");
  app.add_option("--inputs", inputs, "Input files (agent JSON or sample files)")->delimiter(',');
  app.add_option("--n-seeds", n_seeds, "Number of seeds");
  app.add_flag("--no-trajectories", no_trajectories, "Skip per-run trajectory files for sgd");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (list_presets) {
    for (const char* p : driftlab::kPresets) std::cout << p << '\n';
    return 0;
  }

  std::string source_text;
  ExperimentConfig cfg;
  try {
    if (preset_name && config_path) throw driftlab::ConfigError("--preset and --config are mutually exclusive");
    if (experiment && experiment_flag && *experiment != *experiment_flag) {
      throw driftlab::ConfigError("conflicting experiment names '" + *experiment + "' and '" + *experiment_flag + "'");
    }
    if (preset_name) cfg = driftlab::preset(*preset_name);
    if (config_path) {
      std::ifstream is(*config_path);
      if (!is) throw driftlab::ConfigError("cannot read config file " + *config_path);
      std::stringstream ss;
      ss << is.rdbuf();
      source_text = ss.str();
      const auto j = driftlab::json::parse(source_text, nullptr, false);
      if (j.is_discarded()) {
        cfg = driftlab::parse_config(source_text);  // throws with a line number
      } else {
        cfg = driftlab::config_from_json(j, source_text);
      }
    }
    driftlab::apply_seed_env(cfg, std::getenv("DRIFTLAB_SEED"));

    if (experiment) cfg.experiment = *experiment;
    if (experiment_flag) cfg.experiment = *experiment_flag;
    if (mode) {
      try {
        cfg.mode = driftlab::parse_flow_mode(*mode);
      } catch (const driftlab::LookupError& e) {
        throw driftlab::ConfigError(std::string("--mode: ") + e.what());
      }
    }
    set_if(seed, cfg.master_seed);
    set_if(jobs, cfg.jobs);
    set_if(out, cfg.output_path);
    set_if(format, cfg.output_format);
    if (!sigma0.empty()) cfg.sigma0 = sigma0;
    if (!lambda0.empty()) cfg.lambda0 = lambda0;
    set_if(game, cfg.game);
    set_if(integrator, cfg.integrator);
    set_if(dt, cfg.dt);
    set_if(horizon, cfg.horizon);
    set_if(stride, cfg.sample_stride);
    set_if(resolution, cfg.resolution);
    set_if(band, cfg.boundary_band);
    if (lr) cfg.learning_rate = *lr;
    set_if(episodes, cfg.episodes);
    set_if(batch_size, cfg.batch_size);
    if (baseline) cfg.baseline = *baseline;
    set_if(baseline_decay, cfg.baseline_decay);
    set_if(schedule, cfg.schedule);
    set_if(estimator, cfg.estimator);
    set_if(clip, cfg.clip);
    set_if(epochs, cfg.update_epochs);
    set_if(opponents, cfg.opponents);
    if (!variants.empty()) cfg.variants = variants;
    set_if(bc_samples, cfg.bc_samples);
    set_if(bc_noise, cfg.bc_noise);
    set_if(bc_steps, cfg.bc_steps);
    set_if(bc_lr, cfg.bc_learning_rate);
    set_if(instructor_samples, cfg.instructor_samples);
    set_if(instructor_noise, cfg.instructor_noise);
    set_if(eval_games, cfg.eval_games);
    set_if(drift_samples, cfg.drift_samples);
    set_if(n_perm, cfg.n_perm);
    set_if(alternative, cfg.alternative);
    set_if(n_seeds, cfg.n_seeds);
    if (!inputs.empty()) cfg.inputs = inputs;
    if (input_a || input_b) {
      if (!(input_a && input_b)) throw driftlab::ConfigError("--a and --b must be given together");
      cfg.inputs = {*input_a, *input_b};
    }
    if (no_trajectories) cfg.write_trajectories = false;
  } catch (const driftlab::ConfigError& e) {
    std::cerr << "config error";
    if (e.line() > 0) std::cerr << " (line " << e.line() << ")";
    std::cerr << ": " << e.what() << '\n';
    return 2;
  }

  return driftlab::run_and_report(cfg, std::cerr, source_text);
}

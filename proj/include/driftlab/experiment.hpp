#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/serialize.hpp"
#include "driftlab/signaling.hpp"

namespace driftlab {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr std::array<const char*, 9> kExperiments = {"flow",     "sweep",   "sgd",   "rts-bc",  "rts-train",
                                                            "rts-eval", "interop", "drift", "permtest"};

inline constexpr std::array<const char*, 3> kPresets = {"prop1-grid", "prop2-independence",
                                                        "rts-drift-comparison"};

struct ExperimentConfig {
  std::string experiment = "flow";
  FlowMode mode = FlowMode::Single;

  // Initial conditions; flow and sgd runs use every (sigma0, lambda0) pair.
  std::vector<double> sigma0{0.3};
  std::vector<double> lambda0{0.6};
  std::string game = "R";

  // flow / sweep
  std::string integrator = "rk4";  // rk4 | euler
  double dt = 1e-3;
  double horizon = 50.0;
  std::size_t sample_stride = 1;
  std::size_t resolution = 101;
  double boundary_band = 1e-3;

  // Training. Unset fields take per-experiment defaults: learning rate 0.05
  // (sgd) or 0.5 (rts), baseline "none" (sgd) or "moving-average" (rts).
  std::optional<double> learning_rate;
  std::size_t episodes = 20000;  // per training environment
  std::size_t batch_size = 32;
  std::optional<std::string> baseline;
  double baseline_decay = 0.9;
  std::string schedule = "round-robin";  // round-robin | sampled
  std::string estimator = "reinforce";   // reinforce | clipped-surrogate
  double clip = 0.2;
  std::size_t update_epochs = 4;
  std::string opponents = "cycling";  // cycling | sampled

  // RTS
  std::vector<std::string> variants{"Original"};
  std::size_t bc_samples = 2000;
  double bc_noise = 0.1;
  std::size_t bc_steps = 500;
  double bc_learning_rate = 5.0;
  // Weak instructor initialization for RL runs.
  std::size_t instructor_samples = 30;
  double instructor_noise = 0.4;
  std::size_t eval_games = 10000;
  std::size_t drift_samples = 100000;

  // Statistics
  std::size_t n_perm = 10000;
  std::string alternative = "two-sided";
  std::vector<std::string> inputs;

  bool write_trajectories = true;
  std::uint64_t master_seed = 0;
  std::size_t n_seeds = 1;
  unsigned jobs = 1;
  std::string output_path = "driftlab-out";
  std::string output_format = "csv";  // csv | json

  bool operator==(const ExperimentConfig&) const = default;

  double resolved_learning_rate() const;
  std::string resolved_baseline() const;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

json to_json(const ExperimentConfig& cfg);

// Missing keys keep their defaults; unknown keys and mistyped values throw
// ConfigError. `source` is the raw text `j` was parsed from and is used to
// attach line numbers to diagnostics.
ExperimentConfig config_from_json(const json& j, std::string_view source = {});

// Parses and validates a JSON config document.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// 1-based line of the first `"key":` in `source`, or 0.
int key_line(std::string_view source, std::string_view key);

ExperimentConfig preset(std::string_view name);

// DRIFTLAB_SEED, when set to an unsigned integer, replaces the config seed.
// A malformed value is a ConfigError.
void apply_seed_env(ExperimentConfig& cfg, const char* env_value);

struct RunManifest {
  json config;
  std::string version;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;  // relative to the output directory
  json budget = json::object();
  json results = json::object();
};

json to_json(const RunManifest& manifest);

// Validates `cfg`, runs it, writes the outputs and manifest.json under
// cfg.output_path, and returns the manifest. Throws ConfigError for invalid
// configs and other exceptions for runtime failures.
RunManifest run(const ExperimentConfig& cfg);

// Like run() but maps failures to exit codes (0 ok, 1 runtime, 2 config)
// and writes diagnostics to `err`.
int run_and_report(const ExperimentConfig& cfg, std::ostream& err, std::string_view source_text = {});

// Calls fn(i) for i in [0, n) on `jobs` worker threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace driftlab

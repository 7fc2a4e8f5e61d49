#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "driftlab/signaling.hpp"

namespace driftlab {

enum class DriftClass { Aligned, Drifted, Pooling };

const char* to_string(DriftClass c);
DriftClass parse_drift_class(std::string_view name);

// Parameter states over time. States are (sigma, lambda) in single mode and
// (sigma1, sigma2, lambda) in multitask mode.
struct Trajectory {
  FlowMode mode = FlowMode::Single;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  DriftClass terminal_class = DriftClass::Pooling;

  std::size_t size() const { return times.size(); }
  const std::vector<double>& final_state() const { return states.back(); }
  double final_lambda() const { return states.back().back(); }
};

struct IntegratorConfig {
  double step = 1e-3;
  double horizon = 50.0;
  double boundary_eps = 1e-9;
  double convergence_eps = 1e-6;
  // Record every n-th grid step (the initial and final states are always kept).
  std::size_t sample_stride = 1;

  void validate() const;
};

struct FlowConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

// Integration constants of the closed-form solutions. `init` is
// (sigma0, lambda0) or (sigma1, sigma2, lambda0) matching `mode`; multitask
// requires sigma1 == sigma2.
FlowConstants solve_constants(const std::vector<double>& init, FlowMode mode);

// Unclipped closed-form solution of the single-task flow.
std::array<double, 2> closed_form_single(double sigma0, double lambda0, double t);

// Unclipped closed-form solution of the multitask flow from a shared
// instructor initialization; returns (sigma1, sigma2, lambda).
std::array<double, 3> closed_form_multitask(double sigma0, double lambda0, double t);

// Analytic terminal class; inputs must lie in the open unit interval.
DriftClass classify_single(double sigma0, double lambda0);
DriftClass classify_multitask(double lambda0);

// Terminal class read off a final state of the given mode.
DriftClass classify_state(const std::vector<double>& state, FlowMode mode, double convergence_eps);

// Fixed-step RK4 on the PaperField restricted to the unit box. A component
// that reaches 0 or 1 is pinned there (its derivative is zero from then on)
// and the remaining components keep following the field. Boundary contacts
// inside a step are located by splitting the step, so samples stay on the
// grid t = k * step.
Trajectory integrate_clipped(const std::vector<double>& init, FlowMode mode,
                             const IntegratorConfig& cfg = {});

// Explicit Euler on the PaperField, clipping every component to [0, 1] after
// each update. Times are k * step_size.
Trajectory discrete_gradient_ascent(const std::vector<double>& init, double step_size,
                                    std::size_t n_steps, FlowMode mode);

// Initial state of a flow from the (sigma0, lambda0) plane; multitask runs
// share sigma0 between both instructors.
std::vector<double> initial_state(FlowMode mode, double sigma0, double lambda0);

struct SweepCell {
  double sigma0 = 0.0;
  double lambda0 = 0.0;
  DriftClass analytic = DriftClass::Pooling;
  DriftClass numeric = DriftClass::Pooling;
  double sigma_final = 0.0;
  double lambda_final = 0.0;
  bool boundary_band = false;
  // Numeric class matches analytic; always true inside the boundary band.
  bool agree = true;
};

struct SweepOptions {
  double boundary_band = 1e-3;
  unsigned jobs = 1;
};

// Interior grid coordinate (i + 1) / (n + 1).
double grid_coordinate(std::size_t i, std::size_t n);

// n x n interior grid over (sigma0, lambda0), row-major in sigma0. Each cell
// is classified analytically and by integrate_clipped.
std::vector<SweepCell> phase_sweep(std::size_t n, FlowMode mode, const IntegratorConfig& cfg,
                                   const SweepOptions& options = {});

}  // namespace driftlab

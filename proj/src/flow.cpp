#include "driftlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "driftlab/errors.hpp"

namespace driftlab {

namespace {

constexpr double kSeparatrixTol = 1e-12;

std::size_t dimension_of(FlowMode mode) { return mode == FlowMode::Single ? 2 : 3; }

void check_init(const std::vector<double>& init, FlowMode mode) {
  if (init.size() != dimension_of(mode)) {
    throw DimensionMismatch(std::string("initial state has wrong dimension for mode ") + to_string(mode));
  }
  for (double v : init) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("initial state components must lie in [0, 1]");
  }
}

void check_open_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw DomainError(std::string(name) + " must lie in the open interval (0, 1), got " + std::to_string(v));
  }
}

// Clipped PaperField: pinned components do not move.
class ClippedField {
 public:
  explicit ClippedField(FlowMode mode) : field_{mode, FlowConvention::PaperField} {}

  std::vector<double> operator()(const std::vector<double>& x, const std::vector<bool>& pinned) const {
    auto d = field_(x);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (pinned[i]) d[i] = 0.0;
    return d;
  }

 private:
  FlowField field_;
};

std::vector<double> rk4_step(const ClippedField& f, const std::vector<double>& x,
                             const std::vector<bool>& pinned, double h) {
  const std::size_t n = x.size();
  std::vector<double> tmp(n);
  const auto k1 = f(x, pinned);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  const auto k2 = f(tmp, pinned);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  const auto k3 = f(tmp, pinned);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  const auto k4 = f(tmp, pinned);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Pins every free component within eps of a bound; returns true if any changed.
bool pin_at_bounds(std::vector<double>& x, std::vector<bool>& pinned, double eps) {
  bool changed = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (pinned[i]) continue;
    if (x[i] <= eps) {
      x[i] = 0.0;
      pinned[i] = true;
      changed = true;
    } else if (x[i] >= 1.0 - eps) {
      x[i] = 1.0;
      pinned[i] = true;
      changed = true;
    }
  }
  return changed;
}

// Advances x by h, splitting the step at boundary contacts.
void advance(const ClippedField& f, std::vector<double>& x, std::vector<bool>& pinned, double h,
             double eps) {
  double remaining = h;
  // Every split pins at least one component, so this terminates within dim + 1 passes.
  for (std::size_t pass = 0; pass <= x.size() && remaining > 0.0; ++pass) {
    auto y = rk4_step(f, x, pinned, remaining);
    double earliest = 1.0;
    std::size_t trigger = x.size();
    double trigger_bound = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (pinned[i]) continue;
      double bound;
      if (y[i] <= eps) {
        bound = 0.0;
      } else if (y[i] >= 1.0 - eps) {
        bound = 1.0;
      } else {
        continue;
      }
      const double denom = x[i] - y[i];
      const double frac = std::clamp(denom != 0.0 ? (x[i] - bound) / denom : 0.0, 0.0, 1.0);
      if (trigger == x.size() || frac < earliest) {
        earliest = frac;
        trigger = i;
        trigger_bound = bound;
      }
    }
    if (trigger == x.size()) {
      x = std::move(y);
      return;
    }
    const double sub = remaining * earliest;
    if (earliest < 1.0) y = sub > 0.0 ? rk4_step(f, x, pinned, sub) : x;
    x = std::move(y);
    x[trigger] = trigger_bound;
    pinned[trigger] = true;
    pin_at_bounds(x, pinned, eps);
    for (double& v : x) v = std::clamp(v, 0.0, 1.0);
    remaining = earliest < 1.0 ? remaining - sub : 0.0;
  }
}

}  // namespace

const char* to_string(DriftClass c) {
  switch (c) {
    case DriftClass::Aligned:
      return "aligned";
    case DriftClass::Drifted:
      return "drifted";
    case DriftClass::Pooling:
      return "pooling";
  }
  return "unknown";
}

DriftClass parse_drift_class(std::string_view name) {
  if (name == "aligned") return DriftClass::Aligned;
  if (name == "drifted") return DriftClass::Drifted;
  if (name == "pooling") return DriftClass::Pooling;
  throw LookupError("unknown drift class '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (!(step > 0.0)) throw ConfigError("integrator step must be positive");
  if (!(horizon > 0.0)) throw ConfigError("integrator horizon must be positive");
  if (!(step < horizon)) throw ConfigError("integrator step must be smaller than the horizon");
  if (!(boundary_eps > 0.0) || !(convergence_eps > 0.0)) throw ConfigError("integrator tolerances must be positive");
  if (sample_stride == 0) throw ConfigError("sample stride must be at least 1");
}

FlowConstants solve_constants(const std::vector<double>& init, FlowMode mode) {
  check_init(init, mode);
  if (mode == FlowMode::Single) {
    return {0.5 * init[0] - 0.25, 0.5 * init[1] - 0.25};
  }
  if (init[0] != init[1]) {
    throw UnsupportedInitialization("multitask closed form requires sigma1(0) == sigma2(0)");
  }
  return {init[0], init[2] - 0.5};
}

std::array<double, 2> closed_form_single(double sigma0, double lambda0, double t) {
  const auto c = solve_constants({sigma0, lambda0}, FlowMode::Single);
  const double grow = (c.c1 + c.c2) * std::exp(t);
  const double decay = (c.c1 - c.c2) * std::exp(-t);
  return {grow + decay + 0.5, grow - decay + 0.5};
}

std::array<double, 3> closed_form_multitask(double sigma0, double lambda0, double t) {
  const auto c = solve_constants({sigma0, sigma0, lambda0}, FlowMode::Multitask);
  const double r2 = std::sqrt(2.0);
  const double e_neg = std::exp(-t / r2);
  const double e_half = std::exp(t / r2);
  const double e_full = std::exp(r2 * t);
  const double sigma1 = 0.25 * e_neg * (4.0 * c.c1 * e_half + r2 * c.c2 * e_full - r2 * c.c2);
  const double sigma2 = -0.25 * e_neg * (-4.0 * c.c1 * e_half + r2 * c.c2 * e_full - r2 * c.c2);
  // sqrt(2) - 1/sqrt(2) == 1/sqrt(2), so the executor term collapses to a cosh.
  const double lambda = c.c2 * std::cosh(t / r2) + 0.5;
  return {sigma1, sigma2, lambda};
}

DriftClass classify_single(double sigma0, double lambda0) {
  check_open_unit(sigma0, "sigma0");
  check_open_unit(lambda0, "lambda0");
  const double s = sigma0 + lambda0 - 1.0;
  if (std::abs(s) <= kSeparatrixTol) return DriftClass::Pooling;
  return s > 0.0 ? DriftClass::Aligned : DriftClass::Drifted;
}

DriftClass classify_multitask(double lambda0) {
  check_open_unit(lambda0, "lambda0");
  const double s = lambda0 - 0.5;
  if (std::abs(s) <= kSeparatrixTol) return DriftClass::Pooling;
  return s > 0.0 ? DriftClass::Aligned : DriftClass::Drifted;
}

DriftClass classify_state(const std::vector<double>& state, FlowMode mode, double convergence_eps) {
  const double lambda = state.back();
  // The quantity driving lambda: sigma - 1/2 (single) or sigma1 - sigma2 (multitask).
  const double drive = mode == FlowMode::Single ? state[0] - 0.5 : state[0] - state[1];
  if (std::abs(lambda - 0.5) < convergence_eps && std::abs(drive) < convergence_eps) {
    return DriftClass::Pooling;
  }
  if (lambda > 0.5) return DriftClass::Aligned;
  if (lambda < 0.5) return DriftClass::Drifted;
  return drive > 0.0 ? DriftClass::Aligned : DriftClass::Drifted;
}

Trajectory integrate_clipped(const std::vector<double>& init, FlowMode mode, const IntegratorConfig& cfg) {
  check_init(init, mode);
  cfg.validate();
  const ClippedField field(mode);

  Trajectory traj;
  traj.mode = mode;
  std::vector<double> x = init;
  std::vector<bool> pinned(x.size(), false);
  pin_at_bounds(x, pinned, cfg.boundary_eps);

  traj.times.push_back(0.0);
  traj.states.push_back(x);

  const auto n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.step - 1e-9));
  bool converged = max_abs(field(x, pinned)) < cfg.convergence_eps;
  std::size_t k = 0;
  while (!converged && k < n_steps) {
    const double t0 = static_cast<double>(k) * cfg.step;
    ++k;
    const double t1 = std::min(static_cast<double>(k) * cfg.step, cfg.horizon);
    advance(field, x, pinned, t1 - t0, cfg.boundary_eps);
    for (double v : x) {
      if (!std::isfinite(v)) throw std::logic_error("integrate_clipped: non-finite state");
    }
    converged = max_abs(field(x, pinned)) < cfg.convergence_eps;
    if (converged || k == n_steps || k % cfg.sample_stride == 0) {
      traj.times.push_back(t1);
      traj.states.push_back(x);
    }
  }
  traj.terminal_class = classify_state(x, mode, cfg.convergence_eps);
  return traj;
}

Trajectory discrete_gradient_ascent(const std::vector<double>& init, double step_size, std::size_t n_steps,
                                    FlowMode mode) {
  check_init(init, mode);
  if (!(step_size > 0.0)) throw DomainError("step size must be positive");
  const FlowField field{mode, FlowConvention::PaperField};

  Trajectory traj;
  traj.mode = mode;
  std::vector<double> x = init;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const auto d = field(x);
    std::vector<double> next(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) next[i] = std::clamp(x[i] + step_size * d[i], 0.0, 1.0);
    const bool fixed = next == x;
    x = std::move(next);
    traj.times.push_back(static_cast<double>(k) * step_size);
    traj.states.push_back(x);
    if (fixed) break;
  }
  traj.terminal_class = classify_state(x, mode, 1e-6);
  return traj;
}

std::vector<double> initial_state(FlowMode mode, double sigma0, double lambda0) {
  if (mode == FlowMode::Single) return {sigma0, lambda0};
  return {sigma0, sigma0, lambda0};
}

double grid_coordinate(std::size_t i, std::size_t n) {
  return static_cast<double>(i + 1) / static_cast<double>(n + 1);
}

std::vector<SweepCell> phase_sweep(std::size_t n, FlowMode mode, const IntegratorConfig& cfg,
                                   const SweepOptions& options) {
  if (n < 2) throw DomainError("phase_sweep: grid resolution must be at least 2");
  cfg.validate();
  std::vector<SweepCell> cells(n * n);

  auto run_cell = [&](std::size_t idx) {
    SweepCell& cell = cells[idx];
    cell.sigma0 = grid_coordinate(idx / n, n);
    cell.lambda0 = grid_coordinate(idx % n, n);
    double distance;
    if (mode == FlowMode::Single) {
      cell.analytic = classify_single(cell.sigma0, cell.lambda0);
      distance = std::abs(cell.sigma0 + cell.lambda0 - 1.0);
    } else {
      cell.analytic = classify_multitask(cell.lambda0);
      distance = std::abs(cell.lambda0 - 0.5);
    }
    cell.boundary_band = distance < options.boundary_band;
    IntegratorConfig local = cfg;
    local.sample_stride = static_cast<std::size_t>(-1);
    const auto traj = integrate_clipped(initial_state(mode, cell.sigma0, cell.lambda0), mode, local);
    cell.numeric = traj.terminal_class;
    cell.sigma_final = traj.final_state().front();
    cell.lambda_final = traj.final_lambda();
    cell.agree = cell.boundary_band || cell.numeric == cell.analytic;
  };

  const unsigned jobs = std::max(1u, options.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < cells.size(); i += jobs) run_cell(i);
      });
    }
  }
  return cells;
}

}  // namespace driftlab

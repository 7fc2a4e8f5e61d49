// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by id (e.g. `acceptance AC1 AC6`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "driftlab/experiment.hpp"
#include "driftlab/flow.hpp"
#include "driftlab/metrics.hpp"
#include "driftlab/random.hpp"
#include "driftlab/rts.hpp"
#include "driftlab/signaling.hpp"
#include "driftlab/stochastic.hpp"

#ifndef DRIFTLAB_PAPER_PATH
#define DRIFTLAB_PAPER_PATH "paper.md"
#endif

namespace fs = std::filesystem;
using namespace driftlab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

unsigned hardware_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path work_dir(const std::string& name) {
  const auto p = fs::current_path() / "acceptance_work" / name;
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> data_files(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

// ------------------------------------------------------------------ AC1

Verdict ac1() {
  const auto start = std::chrono::steady_clock::now();
  const auto cells = phase_sweep(101, FlowMode::Single, IntegratorConfig{}, {1e-3, 1});
  const double elapsed = seconds_since(start);
  std::size_t checked = 0, disagree = 0, off_target = 0;
  for (const auto& c : cells) {
    if (c.boundary_band) continue;
    ++checked;
    disagree += !c.agree;
    const double l = c.lambda_final;
    const double d = std::min({std::abs(l), std::abs(l - 1.0), std::abs(l - 0.5)});
    off_target += d > 1e-3;
  }
  return {disagree == 0 && off_target == 0 && elapsed < 60.0,
          std::to_string(checked) + " cells outside band, " + std::to_string(disagree) + " disagreements, " +
              std::to_string(off_target) + " terminal lambda off {0,1/2,1}, " + fmt("%.1f s", elapsed)};
}

// ------------------------------------------------------------------ AC2

Verdict ac2() {
  RngStream rng(2024, 2);
  IntegratorConfig ic;
  ic.step = 1e-4;
  ic.horizon = 5.0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FlowMode mode = trial % 2 == 0 ? FlowMode::Single : FlowMode::Multitask;
    const double s0 = 0.02 + 0.96 * rng.uniform();
    const double l0 = 0.02 + 0.96 * rng.uniform();
    const auto traj = integrate_clipped(initial_state(mode, s0, l0), mode, ic);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const auto& x = traj.states[k];
      // Stop at the first boundary contact; the closed forms ignore clipping.
      if (std::any_of(x.begin(), x.end(), [](double v) { return v <= 0.0 || v >= 1.0; })) break;
      const double t = traj.times[k];
      if (mode == FlowMode::Single) {
        const auto cf = closed_form_single(s0, l0, t);
        for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(cf[i] - x[i]));
      } else {
        const auto cf = closed_form_multitask(s0, l0, t);
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(cf[i] - x[i]));
      }
    }
  }
  return {worst <= 1e-6, "max |closed form - RK4| = " + fmt("%.3g", worst) + " over 100 inits"};
}

// ------------------------------------------------------------------ AC3

Verdict ac3() {
  const std::vector<double> lambdas = {0.51, 0.6, 0.75, 0.9};
  const std::vector<double> sigmas = {0.05, 0.3, 0.5, 0.95};
  IntegratorConfig ic;
  double worst_terminal = 0.0, worst_gap = 0.0, worst_gap_before_contact = 0.0;
  std::string detail;
  for (double l0 : lambdas) {
    std::vector<Trajectory> trajs;
    for (double s0 : sigmas) {
      trajs.push_back(integrate_clipped(initial_state(FlowMode::Multitask, s0, l0), FlowMode::Multitask, ic));
      worst_terminal = std::max(worst_terminal, std::abs(trajs.back().final_lambda() - 1.0));
    }
    double gap = 0.0, gap_before = 0.0;
    double first_contact = std::numeric_limits<double>::infinity();
    std::size_t shared = trajs.front().size();
    for (const auto& t : trajs) shared = std::min(shared, t.size());
    bool contact = false;
    for (std::size_t k = 0; k < shared; ++k) {
      double lo = 1.0, hi = 0.0;
      for (const auto& t : trajs) {
        const auto& x = t.states[k];
        lo = std::min(lo, x[2]);
        hi = std::max(hi, x[2]);
        if (!contact && (x[0] <= 0.0 || x[0] >= 1.0 || x[1] <= 0.0 || x[1] >= 1.0)) {
          contact = true;
          first_contact = t.times[k];
        }
      }
      gap = std::max(gap, hi - lo);
      if (!contact) gap_before = std::max(gap_before, hi - lo);
    }
    worst_gap = std::max(worst_gap, gap);
    worst_gap_before_contact = std::max(worst_gap_before_contact, gap_before);
    detail += "; lambda0=" + fmt("%.2f", l0) + ": max gap " + fmt("%.3g", gap) + ", before first instructor contact (t=" +
              fmt("%.3f", first_contact) + ") " + fmt("%.3g", gap_before);
  }
  return {worst_terminal <= 1e-3 && worst_gap <= 1e-6,
          "max |lambda_T - 1| = " + fmt("%.3g", worst_terminal) + ", max lambda spread across sigma0 = " +
              fmt("%.3g", worst_gap) + detail};
}

// ------------------------------------------------------------------ AC4

Verdict ac4() {
  RngStream pick(4, 0);
  const auto game = SignalingGame::match();
  int worst_point = -1;
  double worst_z = 0.0;
  for (int point = 0; point < 20; ++point) {
    const ScalarPolicyPair p{0.05 + 0.9 * pick.uniform(), 0.05 + 0.9 * pick.uniform()};
    const auto exact = expected_reward_gradient(p, game);
    RngStream rng(4, 1 + point);
    std::array<double, 2> s{0, 0}, s2{0, 0};
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ep = sample_episode(p, game, rng);
      const auto g = reinforce_estimate(std::span(&ep, 1), p, 0.0);
      for (int c = 0; c < 2; ++c) {
        s[c] += g[c];
        s2[c] += g[c] * g[c];
      }
    }
    for (int c = 0; c < 2; ++c) {
      const double mean = s[c] / n;
      const double se = std::sqrt((s2[c] / n - mean * mean) / n);
      const double z = std::abs(mean - exact[c]) / se;
      if (z > worst_z) {
        worst_z = z;
        worst_point = point;
      }
    }
  }
  return {worst_z <= 4.0, "max |z| = " + fmt("%.2f", worst_z) + " (point " + std::to_string(worst_point) + ")"};
}

// ------------------------------------------------------------------ AC5

Verdict ac5() {
  const std::vector<double> grid = {0.14, 0.34, 0.54, 0.74, 0.94};
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  std::size_t cells = 0, matches = 0;
  std::vector<std::array<double, 2>> cell_inits;
  for (double s0 : grid)
    for (double l0 : grid)
      if (std::abs(s0 + l0 - 1.0) > 1e-3) cell_inits.push_back({s0, l0});
  std::vector<int> cell_match(cell_inits.size(), 0);
  parallel_for(cell_inits.size(), hardware_jobs(), [&](std::size_t c) {
    const auto [s0, l0] = cell_inits[c];
    std::map<DriftClass, int> votes;
    for (int seed = 0; seed < 50; ++seed) {
      RngStream rng(5, c * 50 + seed);
      ++votes[sgd_train({s0, l0}, SignalingGame::match(), cfg, rng).trajectory.terminal_class];
    }
    const auto majority =
        std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
    cell_match[c] = majority == classify_single(s0, l0);
  });
  cells = cell_inits.size();
  for (int m : cell_match) matches += m;

  int aligned = 0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(55, seed);
    const auto r = multitask_sgd_train({0.2, 0.2, 0.7}, {SignalingGame::match(), SignalingGame::prime_match()}, cfg, rng);
    aligned += r.trajectory.terminal_class == DriftClass::Aligned;
  }
  return {cells == 25 && matches >= 23 && aligned >= 95,
          std::to_string(matches) + "/" + std::to_string(cells) + " grid cells match; multitask aligned in " +
              std::to_string(aligned) + "/100 seeds"};
}

// ------------------------------------------------------------------ AC6

// Attack tables in document order of paper.md: Original, then B..J.
std::vector<rts::Matrix5> paper_tables() {
  std::ifstream is(DRIFTLAB_PAPER_PATH);
  const std::regex row(R"(^\\textsc\{(\w+)\}\s*&\s*([0-9.]+)\s*&\s*([0-9.]+)\s*&\s*([0-9.]+)\s*&\s*([0-9.]+)\s*&\s*([0-9.]+))");
  std::vector<rts::Matrix5> tables;
  std::vector<std::array<double, 5>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, row)) continue;
    std::array<double, 5> r{};
    for (int i = 0; i < 5; ++i) r[i] = std::stod(m[i + 2]);
    rows.push_back(r);
    if (rows.size() == 5) {
      rts::Matrix5 t{};
      for (int i = 0; i < 5; ++i) t[i] = rows[i];
      tables.push_back(t);
      rows.clear();
    }
  }
  return tables;
}

Verdict ac6() {
  const auto printed = paper_tables();
  int table_mismatches = 0;
  if (printed.size() != rts::kAllVariants.size()) {
    return {false, "found " + std::to_string(printed.size()) + " tables in " DRIFTLAB_PAPER_PATH};
  }
  for (std::size_t i = 0; i < printed.size(); ++i) {
    table_mismatches += rts::load_attack_table(rts::kAllVariants[i]).multipliers != printed[i];
  }

  const auto original = rts::load_attack_table(rts::VariantId::Original);
  RngStream rng(6, 0);
  const auto agents = rts::bc_train(rts::bc_generate(original, 2000, 0.0, rng), 500, 5.0);
  double min_diag = 1.0;
  for (int u = 0; u < 5; ++u) min_diag = std::min(min_diag, agents.executor.probs(u)[u]);

  std::array<int, rts::kNumUnits> map{};
  for (auto u : rts::kAllUnits) map[rts::index(u)] = rts::index(rts::best_response(u, original));
  const auto optimal = rts::TabularAgent::deterministic(rts::Role::Instructor, map);
  RngStream eval(6, 1);
  const double winrate =
      rts::evaluate_winrate(optimal, rts::TabularAgent::identity(rts::Role::Executor), original, 10000, eval);

  return {table_mismatches == 0 && min_diag > 0.95 && winrate == 1.0,
          std::to_string(printed.size() - table_mismatches) + "/9 tables match; min BC diagonal " +
              fmt("%.4f", min_diag) + "; optimal win rate " + fmt("%.4f", winrate)};
}

// ------------------------------------------------------------------ AC7

fs::path ac7_output;

Verdict ac7() {
  auto cfg = preset("rts-drift-comparison");
  cfg.jobs = hardware_jobs();
  ac7_output = work_dir("rts-drift-comparison");
  cfg.output_path = ac7_output.string();
  const auto start = std::chrono::steady_clock::now();
  const auto m = run(cfg);
  const double elapsed = seconds_since(start);
  const auto& mass = m.results["off_diagonal_mass"];
  const auto& interop = m.results["interop_winrate"];
  const double p_mass = mass["test_single_greater"]["p_value"].get<double>();
  const double p_interop = interop["test_multi_greater"]["p_value"].get<double>();
  const bool a = mass["mean_multi"].get<double>() < mass["mean_single"].get<double>() && p_mass < 0.05;
  const bool b = interop["mean_multi"].get<double>() > interop["mean_single"].get<double>() && p_interop < 0.05;
  const bool parity = m.budget["parity"].get<bool>();
  return {a && b && parity && elapsed < 1800.0,
          std::string("(a) off-diagonal mass single ") + fmt("%.4f", mass["mean_single"].get<double>()) + " vs multi " +
              fmt("%.4f", mass["mean_multi"].get<double>()) + ", p=" + fmt("%.4g", p_mass) + (a ? " ok" : " not met") +
              "; (b) interop single " + fmt("%.4f", interop["mean_single"].get<double>()) + " vs multi " +
              fmt("%.4f", interop["mean_multi"].get<double>()) + ", p=" + fmt("%.4g", p_interop) +
              (b ? " ok" : " not met") + "; budget parity " + (parity ? "yes" : "no") + "; " +
              std::to_string(cfg.n_seeds) + " seeds in " + fmt("%.0f s", elapsed)};
}

// ------------------------------------------------------------------ AC8

Verdict ac8() {
  std::string detail;
  bool all_same = true;
  for (const char* name : kPresets) {
    auto cfg = preset(name);
    std::map<std::string, std::string> first;
    for (unsigned jobs : {1u, hardware_jobs() > 1 ? hardware_jobs() : 2u}) {
      fs::path dir;
      if (std::string(name) == "rts-drift-comparison" && jobs > 1 && !ac7_output.empty()) {
        dir = ac7_output;  // reuse the parallel run from AC7
      } else {
        dir = work_dir(std::string(name) + "_jobs" + std::to_string(jobs));
        cfg.jobs = jobs;
        cfg.output_path = dir.string();
        run(cfg);
      }
      auto files = data_files(dir);
      if (first.empty()) {
        first = std::move(files);
      } else {
        const bool same = files == first;
        all_same = all_same && same;
        detail += std::string(detail.empty() ? "" : "; ") + name + ": " + std::to_string(first.size()) + " files " +
                  (same ? "identical" : "DIFFER");
      }
    }
  }
  return {all_same, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},
      {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", id.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

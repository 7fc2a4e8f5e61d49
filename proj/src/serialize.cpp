#include "driftlab/serialize.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "driftlab/errors.hpp"

namespace driftlab {

namespace {

const char* role_name(rts::Role role) { return role == rts::Role::Instructor ? "instructor" : "executor"; }

rts::Role parse_role(const std::string& name) {
  if (name == "instructor") return rts::Role::Instructor;
  if (name == "executor") return rts::Role::Executor;
  throw LookupError("unknown agent role '" + name + "'");
}

rts::Matrix5 matrix_from_json(const json& j) {
  if (!j.is_array() || j.size() != rts::kNumUnits) throw DimensionMismatch("expected a 5x5 matrix");
  rts::Matrix5 m{};
  for (int r = 0; r < rts::kNumUnits; ++r) {
    if (!j[r].is_array() || j[r].size() != rts::kNumUnits) throw DimensionMismatch("expected a 5x5 matrix");
    for (int c = 0; c < rts::kNumUnits; ++c) m[r][c] = j[r][c].get<double>();
  }
  return m;
}

std::vector<std::string> state_columns(FlowMode mode) {
  if (mode == FlowMode::Single) return {"sigma", "lambda"};
  return {"sigma1", "sigma2", "lambda"};
}

}  // namespace

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (const auto& c : state_columns(traj.mode)) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    os << format_number(traj.times[i]);
    for (double v : traj.states[i]) os << ',' << format_number(v);
    os << '\n';
  }
}

json to_json(const Trajectory& traj) {
  json j;
  j["mode"] = to_string(traj.mode);
  j["columns"] = state_columns(traj.mode);
  j["t"] = traj.times;
  j["states"] = traj.states;
  j["terminal_class"] = to_string(traj.terminal_class);
  return j;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "sigma0,lambda0,class,sigma_final,lambda_final,analytic_class,boundary_band,agree\n";
  for (const auto& c : cells) {
    os << format_number(c.sigma0) << ',' << format_number(c.lambda0) << ',' << to_string(c.numeric) << ','
       << format_number(c.sigma_final) << ',' << format_number(c.lambda_final) << ',' << to_string(c.analytic)
       << ',' << (c.boundary_band ? 1 : 0) << ',' << (c.agree ? 1 : 0) << '\n';
  }
}

json to_json(const std::vector<SweepCell>& cells) {
  json arr = json::array();
  for (const auto& c : cells) {
    arr.push_back({{"sigma0", c.sigma0},
                   {"lambda0", c.lambda0},
                   {"class", to_string(c.numeric)},
                   {"sigma_final", c.sigma_final},
                   {"lambda_final", c.lambda_final},
                   {"analytic_class", to_string(c.analytic)},
                   {"boundary_band", c.boundary_band},
                   {"agree", c.agree}});
  }
  return arr;
}

void write_drift_matrix_csv(std::ostream& os, const DriftMatrix& matrix) {
  os << "message";
  for (std::size_t a = 0; a < matrix.K; ++a) os << ',' << rts::unit_name(rts::unit_from_index(int(a)));
  os << '\n';
  for (std::size_t m = 0; m < matrix.K; ++m) {
    os << rts::unit_name(rts::unit_from_index(int(m)));
    for (double p : matrix.probs[m]) os << ',' << format_number(p);
    os << '\n';
  }
}

json to_json(const DriftMatrix& matrix) {
  json units = json::array();
  for (std::size_t a = 0; a < matrix.K; ++a) units.push_back(rts::unit_name(rts::unit_from_index(int(a))));
  return {{"units", units},
          {"probs", matrix.probs},
          {"counts", matrix.sample_counts},
          {"empty_rows", matrix.empty_rows},
          {"insufficient_samples", matrix.insufficient_samples},
          {"off_diagonal_mass", off_diagonal_mass(matrix)}};
}

json to_json(const ComparisonResult& result) {
  return {{"statistic", result.statistic},
          {"p_value", result.p_value},
          {"n_permutations", result.n_permutations},
          {"alternative", to_string(result.alternative)}};
}

json to_json(const rts::AttackTable& table) {
  json units = json::array();
  for (auto u : rts::kAllUnits) units.push_back(rts::unit_name(u));
  return {{"variant_id", table.variant}, {"units", units}, {"multipliers", table.multipliers}};
}

rts::AttackTable attack_table_from_json(const json& j) {
  rts::AttackTable t;
  t.variant = j.at("variant_id").get<std::string>();
  if (j.contains("units")) {
    const auto& units = j.at("units");
    if (!units.is_array() || units.size() != rts::kNumUnits) throw DimensionMismatch("attack table: expected 5 units");
    for (int i = 0; i < rts::kNumUnits; ++i) {
      if (units[i].get<std::string>() != rts::unit_name(rts::unit_from_index(i))) {
        throw DomainError("attack table: units must be listed in index order");
      }
    }
  }
  t.multipliers = matrix_from_json(j.at("multipliers"));
  return t;
}

json to_json(const rts::TabularAgent& agent) {
  return {{"role", role_name(agent.role())}, {"logits", agent.logits()}, {"probs", agent.prob_matrix()}};
}

rts::TabularAgent agent_from_json(const json& j) {
  return rts::TabularAgent(parse_role(j.at("role").get<std::string>()), matrix_from_json(j.at("logits")));
}

void write_training_log_csv(std::ostream& os, const rts::TrainingLog& log) {
  os << "episode,variant,win,reward,diag_mass\n";
  for (const auto& r : log.rows) {
    os << r.episode << ',' << r.variant << ',' << format_number(r.win) << ',' << format_number(r.reward) << ','
       << format_number(r.diag_mass) << '\n';
  }
}

std::vector<double> read_numeric_column(std::istream& is) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string field = line.substr(0, line.find(','));
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(field);
      out.push_back(v);
    } catch (const std::exception&) {
      if (line_no == 1) continue;
      throw DomainError("line " + std::to_string(line_no) + ": not a number: '" + field + "'");
    }
  }
  return out;
}

}  // namespace driftlab

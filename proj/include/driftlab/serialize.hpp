#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/flow.hpp"
#include "driftlab/metrics.hpp"
#include "driftlab/rts.hpp"

namespace driftlab {

using json = nlohmann::ordered_json;

// Shortest round-trippable decimal form ("%.17g").
std::string format_number(double x);

// Columns: t,sigma,lambda (single) or t,sigma1,sigma2,lambda (multitask).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
json to_json(const Trajectory& traj);

// Columns: sigma0,lambda0,class,sigma_final,lambda_final,analytic_class,boundary_band,agree.
void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);
json to_json(const std::vector<SweepCell>& cells);

// K x K grid with a leading message column and unit-name headers.
void write_drift_matrix_csv(std::ostream& os, const DriftMatrix& matrix);
json to_json(const DriftMatrix& matrix);

json to_json(const ComparisonResult& result);

// Schema: {"variant_id", "units": [names in index order], "multipliers": 5x5}.
json to_json(const rts::AttackTable& table);
rts::AttackTable attack_table_from_json(const json& j);

json to_json(const rts::TabularAgent& agent);
rts::TabularAgent agent_from_json(const json& j);

// Columns: episode,variant,win,reward,diag_mass.
void write_training_log_csv(std::ostream& os, const rts::TrainingLog& log);

// Reads one number per line (first comma-separated field); a non-numeric
// first line is taken as a header and skipped.
std::vector<double> read_numeric_column(std::istream& is);

}  // namespace driftlab

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "driftlab/random.hpp"
#include "driftlab/rts.hpp"

namespace driftlab {

// Empirical message -> action conditionals of an executor.
struct DriftMatrix {
  std::size_t K = 0;
  std::vector<std::vector<double>> probs;  // [m][a] = P(a | m)
  std::vector<std::size_t> sample_counts;  // samples per message
  std::vector<std::size_t> empty_rows;     // messages that were never drawn
  bool insufficient_samples = false;       // n_samples < K
};

// Draws n_samples messages from message_dist and one executor action per
// message. An empty message_dist means uniform.
DriftMatrix drift_matrix(const rts::TabularAgent& executor, std::span<const double> message_dist,
                         std::size_t n_samples, RngStream& rng);

// Wraps an exact conditional matrix (e.g. an executor's softmax rows).
DriftMatrix exact_drift_matrix(const rts::Matrix5& probs);

double off_diagonal_mass(const DriftMatrix& matrix);

struct DriftFlag {
  bool drifted = false;
  std::vector<double> diagonal;
  std::vector<std::size_t> offending;  // messages with P(a_i | m_i) < 1/2
};

DriftFlag executor_drift_flag(const rts::TabularAgent& executor);
DriftFlag executor_drift_flag(const std::vector<double>& diagonal);

enum class Alternative { TwoSided, Greater, Less };

const char* to_string(Alternative alt);
Alternative parse_alternative(std::string_view name);

struct ComparisonResult {
  double statistic = 0.0;  // mean(a) - mean(b)
  double p_value = 1.0;
  std::size_t n_permutations = 0;
  Alternative alternative = Alternative::TwoSided;
};

// Two-sample permutation test on the difference of means with add-one
// smoothing: p = (#{permuted statistics at least as extreme} + 1) / (n_perm + 1).
// Greater tests mean(a) > mean(b).
ComparisonResult permutation_test(std::span<const double> a, std::span<const double> b, std::size_t n_perm,
                                  Alternative alternative, RngStream& rng);

}  // namespace driftlab

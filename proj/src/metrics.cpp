#include "driftlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "driftlab/errors.hpp"

namespace driftlab {

namespace {

constexpr double kTieTolerance = 1e-12;

double mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size()); }

}  // namespace

DriftMatrix drift_matrix(const rts::TabularAgent& executor, std::span<const double> message_dist,
                         std::size_t n_samples, RngStream& rng) {
  constexpr std::size_t K = rts::kNumUnits;
  std::vector<double> dist(message_dist.begin(), message_dist.end());
  if (dist.empty()) dist.assign(K, 1.0 / K);
  if (dist.size() != K) throw DimensionMismatch("drift_matrix: message distribution must have 5 entries");
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("drift_matrix: message distribution has a bad entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("drift_matrix: message distribution must sum to 1");

  DriftMatrix out;
  out.K = K;
  out.probs.assign(K, std::vector<double>(K, 0.0));
  out.sample_counts.assign(K, 0);
  out.insufficient_samples = n_samples < K;
  std::vector<std::vector<std::size_t>> counts(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t m = rng.categorical(dist);
    const int a = executor.sample(static_cast<int>(m), rng);
    ++counts[m][static_cast<std::size_t>(a)];
    ++out.sample_counts[m];
  }
  for (std::size_t m = 0; m < K; ++m) {
    if (out.sample_counts[m] == 0) {
      out.empty_rows.push_back(m);
      continue;
    }
    for (std::size_t a = 0; a < K; ++a) out.probs[m][a] = double(counts[m][a]) / double(out.sample_counts[m]);
  }
  return out;
}

DriftMatrix exact_drift_matrix(const rts::Matrix5& probs) {
  DriftMatrix out;
  out.K = rts::kNumUnits;
  for (const auto& row : probs) out.probs.emplace_back(row.begin(), row.end());
  out.sample_counts.assign(out.K, 0);
  return out;
}

double off_diagonal_mass(const DriftMatrix& matrix) {
  double mass = 0.0;
  for (std::size_t m = 0; m < matrix.probs.size(); ++m)
    for (std::size_t a = 0; a < matrix.probs[m].size(); ++a)
      if (a != m) mass += matrix.probs[m][a];
  return mass;
}

DriftFlag executor_drift_flag(const std::vector<double>& diagonal) {
  DriftFlag flag;
  flag.diagonal = diagonal;
  for (std::size_t i = 0; i < diagonal.size(); ++i) {
    if (diagonal[i] < 0.5) flag.offending.push_back(i);
  }
  flag.drifted = !flag.offending.empty();
  return flag;
}

DriftFlag executor_drift_flag(const rts::TabularAgent& executor) {
  std::vector<double> diagonal;
  for (int m = 0; m < rts::kNumUnits; ++m) diagonal.push_back(executor.probs(m)[m]);
  return executor_drift_flag(diagonal);
}

const char* to_string(Alternative alt) {
  switch (alt) {
    case Alternative::TwoSided:
      return "two-sided";
    case Alternative::Greater:
      return "greater";
    case Alternative::Less:
      return "less";
  }
  return "?";
}

Alternative parse_alternative(std::string_view name) {
  for (Alternative a : {Alternative::TwoSided, Alternative::Greater, Alternative::Less}) {
    if (name == to_string(a)) return a;
  }
  throw LookupError("unknown alternative '" + std::string(name) + "'");
}

ComparisonResult permutation_test(std::span<const double> a, std::span<const double> b, std::size_t n_perm,
                                  Alternative alternative, RngStream& rng) {
  if (a.empty() || b.empty()) throw std::invalid_argument("permutation_test: both samples must be nonempty");
  if (n_perm < 1000) throw std::invalid_argument("permutation_test: n_perm must be at least 1000");

  ComparisonResult out;
  out.statistic = mean(a) - mean(b);
  out.n_permutations = n_perm;
  out.alternative = alternative;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();

  auto extreme = [&](double stat) {
    switch (alternative) {
      case Alternative::Greater:
        return stat >= out.statistic - kTieTolerance;
      case Alternative::Less:
        return stat <= out.statistic + kTieTolerance;
      case Alternative::TwoSided:
        return std::abs(stat) >= std::abs(out.statistic) - kTieTolerance;
    }
    return false;
  };

  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    // Partial Fisher-Yates: the first na slots become the permuted sample a.
    double sum_a = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
      const std::size_t j = i + rng.below(pooled.size() - i);
      std::swap(pooled[i], pooled[j]);
      sum_a += pooled[i];
    }
    const double stat = sum_a / double(na) - (total - sum_a) / double(nb);
    if (extreme(stat)) ++hits;
  }
  out.p_value = double(hits + 1) / double(n_perm + 1);
  return out;
}

}  // namespace driftlab

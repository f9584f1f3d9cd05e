#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sessionlens/features.hpp"

namespace sessionlens {

// Which continuous quantity a correlation or model targets.
enum class Target { kGain, kState };

const char* to_string(Target target);
Target parse_target(std::string_view text);  // "gain" | "state"

// Sample Pearson correlation. Identical inputs (and power-of-two rescalings)
// return exactly +/-1 via the Cauchy-Schwarz bound, so duplicate columns are
// prunable at tau = 1.0. Throws DegenerateDistributionError when either side
// has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Per-feature correlation against continuous gain and state, canonical order.
struct RelevanceTable {
  std::vector<std::string> features;
  std::vector<double> corr_gain;
  std::vector<double> corr_state;

  std::size_t size() const { return features.size(); }
  double corr(std::size_t i, Target target) const {
    return target == Target::kGain ? corr_gain[i] : corr_state[i];
  }
  double corr_of(std::string_view feature, Target target) const;

  // CSV "feature,corr_gain,corr_state".
  static RelevanceTable parse(const std::string& csv_text);
  static RelevanceTable load(const std::string& path);
  std::string to_csv() const;
};

// Correlates every canonical column with the given continuous targets.
// Constant columns (or a constant target) correlate 0 and add a warning
// instead of failing, so tiny training folds stay usable.
RelevanceTable compute_relevance(const FeatureMatrix& matrix,
                                 std::span<const double> gain,
                                 std::span<const double> state,
                                 std::vector<std::string>* warnings = nullptr);

// Retained features plus the parameters that produced the subset.
struct FeatureSubset {
  std::vector<std::string> names;  // canonical order
  double tau = 1.0;
  double threshold = 0.0;
  Target target = Target::kGain;

  // Canonical column indices of the retained names.
  std::vector<int> indices() const;
};

// Keeps features with |corr_target| >= threshold (boundary inclusive).
// The absolute value matters: negative correlations of matching magnitude
// count as relevant.
FeatureSubset relevance_filter(const RelevanceTable& table, Target target,
                               double threshold);

// Greedy pairwise pruning. While some retained pair has |pearson| >= tau
// (largest first; ties by canonical order of the pair), drop the member with
// the smaller |corr_target| from `table` (ties drop the later canonical
// name). Constant columns correlate 0 with everything, are never pruned by
// this rule, and add a warning.
FeatureSubset redundancy_prune(const FeatureMatrix& matrix,
                               const FeatureSubset& subset, double tau,
                               const RelevanceTable& table, Target target,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace sessionlens

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sessionlens/models.hpp"
#include "sessionlens/selection.hpp"

namespace sessionlens {

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // ascending indices per fold
};

// Per-class shuffled round-robin assignment starting at fold 0, so per-class
// fold counts differ by at most one. Deterministic per seed.
FoldPlan stratified_kfold(const std::vector<int>& y, int k, std::uint64_t seed);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
  std::array<ClassScore, kNumClasses> per_class;
  ClassScore macro;  // unweighted mean over the three classes
  double accuracy = 0.0;
  std::int64_t total = 0;
};

// Precision TP/(TP+FP) and recall TP/(TP+FN) fall back to 0 on an empty
// denominator; F1 is 0 when precision + recall is 0.
Metrics metrics(const std::vector<int>& predictions, const std::vector<int>& truth);
Metrics metrics_from_confusion(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion);

struct SelectionConfig {
  enum class Scope { kPerFold, kGlobal };
  double tau = 1.0;
  double threshold = 0.0;
  // Per-fold recomputes relevance and pruning from training rows only
  // (leakage-safe); global computes them once from the full dataset, the way
  // a whole-dataset correlation table would.
  Scope scope = Scope::kPerFold;
};

const char* to_string(SelectionConfig::Scope scope);
SelectionConfig::Scope parse_scope(std::string_view text);  // per_fold | global

// Feature matrix joined with per-row class labels and the continuous value
// the selection step correlates against (gain or post-test score).
struct LabeledData {
  FeatureMatrix features;
  std::vector<int> y;
  std::vector<double> target;
  Target task = Target::kGain;
};

// Joins matrix rows to scored+labeled records by (user_id, topic_id).
LabeledData make_labeled(const FeatureMatrix& matrix,
                         const std::vector<KnowledgeRecord>& records, Target task);

struct EvalReport {
  ModelKind kind = ModelKind::kNB;
  std::map<std::string, double> hyper;
  std::uint64_t seed = 0;
  Target task = Target::kGain;
  SelectionConfig selection;
  int k = 10;
  int reps = 10;
  // Mean number of features given to the model per executed fold. KS_Zhang
  // always counts its two bound columns.
  double n_features = 0.0;
  std::int64_t runtime_ms = 0;
  Metrics pooled;  // one confusion matrix over all folds and repetitions
  std::vector<double> fold_accuracy;  // per (repetition, fold), in order
  int folds_skipped = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Repeated stratified k-fold CV. Per repetition r the fold plan is seeded
// with mix64(seed, r); per fold f the model trains with seed
// mix64(mix64(seed, r), f). Selection and standardization see training rows
// only. All (prediction, truth) pairs pool into one confusion matrix.
// Repetitions run in parallel; results are identical to a serial run.
EvalReport repeated_cv(const LabeledData& data, const ModelSpec& spec,
                       const SelectionConfig& selection, int k = 10, int reps = 10,
                       std::uint64_t seed = 0);

struct GridResult {
  EvalReport best;
  std::vector<EvalReport> all;  // canonical cell order
};

// Evaluates every (hyperparameters, tau, threshold) cell with the SAME seed,
// so every cell sees identical fold plans. Cell order: hyperparameter sets
// as given, then tau values as given, then thresholds as given. Best cell =
// highest accuracy, ties by macro F1, then the earlier cell.
GridResult grid_search(const LabeledData& data, ModelKind kind,
                       const std::vector<std::map<std::string, double>>& hyper_grid,
                       const std::vector<double>& taus,
                       const std::vector<double>& thresholds,
                       SelectionConfig::Scope scope, int k, int reps,
                       std::uint64_t seed);

struct ImportanceEntry {
  std::string feature;
  double mda = 0.0;
  int rank = 0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;  // descending MDA; ties keep canonical order
  std::string to_csv() const;            // feature,mda,rank
};

// Permutation importance on a random forest's out-of-bag rows: per tree,
// baseline accuracy minus accuracy after permuting one feature's values
// within that tree's OOB rows (fresh permutation per tree x feature, seeded
// mix64(mix64(seed, tree), feature)), averaged over trees.
ImportanceReport mda_importance(const LabeledData& data, const ModelSpec& rf_spec,
                                std::uint64_t seed);

}  // namespace sessionlens

#include "sessionlens/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "sessionlens/csv.hpp"
#include "sessionlens/errors.hpp"
#include "sessionlens/parallel.hpp"
#include "sessionlens/rng.hpp"

namespace sessionlens {

namespace {

constexpr std::size_t kMaxWarnings = 50;

bool requires_two_classes(ModelKind kind) {
  return kind == ModelKind::kLR || kind == ModelKind::kSVM || kind == ModelKind::kMP;
}

FeatureMatrix submatrix(const FeatureMatrix& matrix, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.names = matrix.names;
  out.rows.reserve(rows.size());
  for (const std::size_t i : rows) {
    out.rows.push_back(matrix.rows[i]);
    if (i < matrix.row_keys.size()) out.row_keys.push_back(matrix.row_keys[i]);
  }
  return out;
}

std::vector<std::vector<double>> gather_rows(const FeatureMatrix& matrix,
                                             const std::vector<std::size_t>& rows,
                                             const std::vector<int>& cols) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const std::size_t i : rows) {
    std::vector<double> row;
    row.reserve(cols.size());
    for (const int c : cols) row.push_back(matrix.rows[i][static_cast<std::size_t>(c)]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

const char* to_string(SelectionConfig::Scope scope) {
  return scope == SelectionConfig::Scope::kPerFold ? "per_fold" : "global";
}

SelectionConfig::Scope parse_scope(std::string_view text) {
  if (text == "per_fold") return SelectionConfig::Scope::kPerFold;
  if (text == "global") return SelectionConfig::Scope::kGlobal;
  throw DataError("unknown selection scope '" + std::string(text) +
                  "' (want per_fold|global)");
}

FoldPlan stratified_kfold(const std::vector<int>& y, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("stratified_kfold: k must be >= 2");
  if (static_cast<std::size_t>(k) > y.size()) {
    throw DataError("stratified_kfold: k exceeds the number of rows");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(static_cast<std::size_t>(k), {});
  Rng rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      plan.folds[pos % static_cast<std::size_t>(k)].push_back(members[pos]);
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

Metrics metrics_from_confusion(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion) {
  Metrics m;
  m.confusion = confusion;
  std::int64_t correct = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    correct += confusion[c][c];
    for (int p = 0; p < kNumClasses; ++p) m.total += confusion[c][p];
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const std::int64_t tp = confusion[c][c];
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += confusion[o][c];
      fn += confusion[c][o];
    }
    ClassScore& s = m.per_class[c];
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    m.macro.precision += s.precision / kNumClasses;
    m.macro.recall += s.recall / kNumClasses;
    m.macro.f1 += s.f1 / kNumClasses;
  }
  m.accuracy = m.total > 0 ? static_cast<double>(correct) / m.total : 0.0;
  return m;
}

Metrics metrics(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size()) throw DataError("metrics: length mismatch");
  if (predictions.empty()) throw DataError("metrics: empty input");
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumClasses || predictions[i] < 0 ||
        predictions[i] >= kNumClasses) {
      throw DataError("metrics: label out of range");
    }
    ++confusion[truth[i]][predictions[i]];
  }
  return metrics_from_confusion(confusion);
}

LabeledData make_labeled(const FeatureMatrix& matrix,
                         const std::vector<KnowledgeRecord>& records, Target task) {
  std::map<std::pair<std::string, std::string>, const KnowledgeRecord*> by_key;
  for (const auto& record : records) {
    by_key[{record.user_id, record.topic_id}] = &record;
  }
  LabeledData data;
  data.features = matrix;
  data.task = task;
  for (const auto& key : matrix.row_keys) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw DataError("no record for session " + key.first + ":" + key.second);
    }
    const KnowledgeRecord& record = *it->second;
    const auto& cls = task == Target::kGain ? record.gain_class : record.state_class;
    if (!cls) {
      throw DataError("record " + key.first + ":" + key.second +
                      " has no class labels; label the records first");
    }
    data.y.push_back(static_cast<int>(*cls));
    data.target.push_back(task == Target::kGain ? record.gain : record.post_score);
  }
  return data;
}

namespace {

struct RepOutcome {
  std::vector<std::pair<int, int>> pairs;  // (truth, prediction)
  std::vector<double> fold_accuracy;
  double n_features_sum = 0.0;
  int folds_run = 0;
  int folds_skipped = 0;
  std::set<std::string> shared_warnings;    // deduplicated selection chatter
  std::vector<std::string> skip_warnings;   // one per skipped fold
};

}  // namespace

EvalReport repeated_cv(const LabeledData& data, const ModelSpec& spec,
                       const SelectionConfig& selection, int k, int reps,
                       std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t n = data.features.n_rows();
  if (data.y.size() != n || data.target.size() != n) {
    throw DataError("repeated_cv: labels/targets do not match the matrix");
  }
  if (reps < 1) throw DataError("repeated_cv: reps must be >= 1");
  const bool is_ks = spec.kind == ModelKind::kKsZhang;

  std::vector<int> all_columns(kFeatureCount);
  std::iota(all_columns.begin(), all_columns.end(), 0);

  // Global scope: one subset from the full dataset, reused in every fold.
  std::vector<int> global_cols;
  std::set<std::string> global_warnings;
  if (!is_ks && selection.scope == SelectionConfig::Scope::kGlobal) {
    std::vector<std::string> warnings;
    const RelevanceTable table =
        compute_relevance(data.features, data.target, data.target, &warnings);
    FeatureSubset subset = relevance_filter(table, data.task, selection.threshold);
    subset = redundancy_prune(data.features, subset, selection.tau, table, data.task,
                              &warnings);
    global_warnings.insert(warnings.begin(), warnings.end());
    global_cols = subset.indices();
    if (global_cols.empty()) {
      throw DataError("global feature selection kept no features");
    }
  }

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
    RepOutcome& out = outcomes[r];
    const std::uint64_t seed_r = mix64(seed, r);
    const FoldPlan plan = stratified_kfold(data.y, k, seed_r);
    for (int f = 0; f < k; ++f) {
      const auto& test_rows = plan.folds[static_cast<std::size_t>(f)];
      std::vector<std::size_t> train_rows;
      train_rows.reserve(n - test_rows.size());
      for (int other = 0; other < k; ++other) {
        if (other == f) continue;
        const auto& fold = plan.folds[static_cast<std::size_t>(other)];
        train_rows.insert(train_rows.end(), fold.begin(), fold.end());
      }
      std::sort(train_rows.begin(), train_rows.end());

      const auto fold_tag = [&] {
        std::ostringstream os;
        os << "rep " << r << " fold " << f;
        return os.str();
      };

      std::vector<int> cols;
      if (is_ks) {
        cols = all_columns;
      } else if (selection.scope == SelectionConfig::Scope::kGlobal) {
        cols = global_cols;
      } else {
        const FeatureMatrix train_matrix = submatrix(data.features, train_rows);
        std::vector<double> train_target;
        train_target.reserve(train_rows.size());
        for (const std::size_t i : train_rows) train_target.push_back(data.target[i]);
        std::vector<std::string> warnings;
        const RelevanceTable table =
            compute_relevance(train_matrix, train_target, train_target, &warnings);
        FeatureSubset subset = relevance_filter(table, data.task, selection.threshold);
        subset = redundancy_prune(train_matrix, subset, selection.tau, table, data.task,
                                  &warnings);
        out.shared_warnings.insert(warnings.begin(), warnings.end());
        cols = subset.indices();
        if (cols.empty()) {
          ++out.folds_skipped;
          out.skip_warnings.push_back(fold_tag() + ": empty feature subset, skipped");
          continue;
        }
      }

      std::set<int> train_classes;
      for (const std::size_t i : train_rows) train_classes.insert(data.y[i]);
      if (train_classes.size() < 2 && requires_two_classes(spec.kind)) {
        ++out.folds_skipped;
        out.skip_warnings.push_back(fold_tag() + ": single-class training fold, skipped");
        continue;
      }

      Dataset train_ds;
      train_ds.x = gather_rows(data.features, train_rows, cols);
      for (const std::size_t i : train_rows) train_ds.y.push_back(data.y[i]);

      ModelSpec fold_spec = spec;
      fold_spec.seed = mix64(seed_r, static_cast<std::uint64_t>(f));
      TrainedModel model;
      try {
        model = fit(fold_spec, train_ds);
      } catch (const DegenerateDistributionError& e) {
        ++out.folds_skipped;
        out.skip_warnings.push_back(fold_tag() + ": " + e.what() + ", skipped");
        continue;
      }

      const auto test_x = gather_rows(data.features, test_rows, cols);
      const std::vector<int> predictions = model.predict_batch(test_x);
      int correct = 0;
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        const int truth = data.y[test_rows[i]];
        out.pairs.emplace_back(truth, predictions[i]);
        if (predictions[i] == truth) ++correct;
      }
      out.fold_accuracy.push_back(static_cast<double>(correct) /
                                  static_cast<double>(test_rows.size()));
      out.n_features_sum += is_ks ? 2.0 : static_cast<double>(cols.size());
      ++out.folds_run;
    }
  });

  EvalReport report;
  report.kind = spec.kind;
  report.hyper = spec.hyper;
  report.seed = seed;
  report.task = data.task;
  report.selection = selection;
  report.k = k;
  report.reps = reps;

  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
  std::set<std::string> shared = std::move(global_warnings);
  std::vector<std::string> skip_warnings;
  double n_features_sum = 0.0;
  int folds_run = 0;
  for (const RepOutcome& out : outcomes) {
    for (const auto& [truth, pred] : out.pairs) ++confusion[truth][pred];
    report.fold_accuracy.insert(report.fold_accuracy.end(), out.fold_accuracy.begin(),
                                out.fold_accuracy.end());
    report.folds_skipped += out.folds_skipped;
    n_features_sum += out.n_features_sum;
    folds_run += out.folds_run;
    shared.insert(out.shared_warnings.begin(), out.shared_warnings.end());
    skip_warnings.insert(skip_warnings.end(), out.skip_warnings.begin(),
                         out.skip_warnings.end());
  }
  report.pooled = metrics_from_confusion(confusion);
  report.n_features = folds_run > 0 ? n_features_sum / folds_run : 0.0;
  if (folds_run == 0) {
    skip_warnings.push_back("every fold was skipped; metrics are all zero");
  }
  // Skip notices first: they are the actionable part and must survive the
  // warning cap even when selection chatter is plentiful.
  report.warnings = std::move(skip_warnings);
  report.warnings.insert(report.warnings.end(), shared.begin(), shared.end());
  if (report.warnings.size() > kMaxWarnings) {
    const std::size_t extra = report.warnings.size() - kMaxWarnings;
    report.warnings.resize(kMaxWarnings);
    report.warnings.push_back("(+" + std::to_string(extra) + " more warnings)");
  }
  report.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json doc;
  doc["format"] = "sessionlens.eval";
  doc["version"] = 1;
  doc["method"] = to_string(kind);
  doc["task"] = to_string(task);
  doc["hyper"] = hyper;
  doc["seed"] = seed;
  doc["selection"] = {{"tau", selection.tau},
                      {"threshold", selection.threshold},
                      {"scope", to_string(selection.scope)}};
  doc["k"] = k;
  doc["reps"] = reps;
  doc["n_features"] = n_features;
  doc["runtime_ms"] = runtime_ms;
  doc["folds_skipped"] = folds_skipped;
  doc["accuracy"] = pooled.accuracy;
  static const char* kClassNames[kNumClasses] = {"Low", "Moderate", "High"};
  nlohmann::json per_class;
  for (int c = 0; c < kNumClasses; ++c) {
    per_class[kClassNames[c]] = {{"precision", pooled.per_class[c].precision},
                                 {"recall", pooled.per_class[c].recall},
                                 {"f1", pooled.per_class[c].f1}};
  }
  doc["per_class"] = std::move(per_class);
  doc["macro"] = {{"precision", pooled.macro.precision},
                  {"recall", pooled.macro.recall},
                  {"f1", pooled.macro.f1}};
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : pooled.confusion) confusion.push_back(row);
  doc["confusion"] = std::move(confusion);
  doc["fold_accuracy"] = fold_accuracy;
  doc["warnings"] = warnings;
  return doc;
}

std::string EvalReport::csv_header() {
  return "method,tau,threshold,n_features,runtime_ms,"
         "p_low,r_low,f1_low,p_moderate,r_moderate,f1_moderate,"
         "p_high,r_high,f1_high,p_macro,r_macro,f1_macro,accuracy";
}

std::string EvalReport::csv_row() const {
  std::ostringstream os;
  os << to_string(kind) << ',' << csv::format_value(selection.tau) << ','
     << csv::format_value(selection.threshold) << ',' << csv::format_value(n_features)
     << ',' << runtime_ms;
  for (int c = 0; c < kNumClasses; ++c) {
    os << ',' << csv::format_value(pooled.per_class[c].precision) << ','
       << csv::format_value(pooled.per_class[c].recall) << ','
       << csv::format_value(pooled.per_class[c].f1);
  }
  os << ',' << csv::format_value(pooled.macro.precision) << ','
     << csv::format_value(pooled.macro.recall) << ','
     << csv::format_value(pooled.macro.f1) << ',' << csv::format_value(pooled.accuracy);
  return os.str();
}

GridResult grid_search(const LabeledData& data, ModelKind kind,
                       const std::vector<std::map<std::string, double>>& hyper_grid,
                       const std::vector<double>& taus,
                       const std::vector<double>& thresholds,
                       SelectionConfig::Scope scope, int k, int reps,
                       std::uint64_t seed) {
  if (hyper_grid.empty() || taus.empty() || thresholds.empty()) {
    throw DataError("grid_search: empty grid");
  }
  GridResult result;
  std::size_t best = 0;
  for (const auto& hyper : hyper_grid) {
    const ModelSpec spec = ModelSpec::make(kind, hyper, seed);
    for (const double tau : taus) {
      for (const double threshold : thresholds) {
        SelectionConfig sel;
        sel.tau = tau;
        sel.threshold = threshold;
        sel.scope = scope;
        result.all.push_back(repeated_cv(data, spec, sel, k, reps, seed));
        const EvalReport& cell = result.all.back();
        const EvalReport& incumbent = result.all[best];
        if (cell.pooled.accuracy > incumbent.pooled.accuracy ||
            (cell.pooled.accuracy == incumbent.pooled.accuracy &&
             cell.pooled.macro.f1 > incumbent.pooled.macro.f1)) {
          best = result.all.size() - 1;
        }
      }
    }
  }
  result.best = result.all[best];
  return result;
}

std::string ImportanceReport::to_csv() const {
  std::ostringstream os;
  os << "feature,mda,rank\n";
  for (const auto& entry : entries) {
    os << entry.feature << ',' << csv::format_value(entry.mda) << ',' << entry.rank
       << '\n';
  }
  return os.str();
}

ImportanceReport mda_importance(const LabeledData& data, const ModelSpec& rf_spec,
                                std::uint64_t seed) {
  if (rf_spec.kind != ModelKind::kRF) {
    throw DataError("mda_importance requires an RF model spec");
  }
  const std::size_t n = data.features.n_rows();
  if (data.y.size() != n) throw DataError("mda_importance: labels do not match matrix");

  Dataset ds;
  ds.y = data.y;
  ds.x.reserve(n);
  for (const auto& row : data.features.rows) {
    ds.x.emplace_back(row.values.begin(), row.values.end());
  }
  const TrainedModel model = fit(rf_spec, ds);

  const std::size_t n_trees = model.trees.size();
  std::vector<double> baseline(n_trees, 0.0);
  std::vector<bool> usable(n_trees, false);
  for (std::size_t t = 0; t < n_trees; ++t) {
    const auto& rows = model.oob[t];
    if (rows.empty()) continue;
    usable[t] = true;
    int correct = 0;
    for (const std::size_t i : rows) {
      if (model.trees[t].predict(ds.x[i]) == ds.y[i]) ++correct;
    }
    baseline[t] = static_cast<double>(correct) / static_cast<double>(rows.size());
  }

  const std::size_t d = data.features.names.size();
  std::vector<double> mda(d, 0.0);
  parallel_for(d, [&](std::size_t f) {
    double delta_sum = 0.0;
    int used = 0;
    std::vector<double> values;
    for (std::size_t t = 0; t < n_trees; ++t) {
      if (!usable[t]) continue;
      const auto& rows = model.oob[t];
      values.clear();
      for (const std::size_t i : rows) values.push_back(ds.x[i][f]);
      Rng rng(mix64(mix64(seed, t), f));
      rng.shuffle(values);
      int correct = 0;
      std::vector<double> probe;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        probe = ds.x[rows[k]];
        probe[f] = values[k];
        if (model.trees[t].predict(probe) == ds.y[rows[k]]) ++correct;
      }
      const double permuted =
          static_cast<double>(correct) / static_cast<double>(rows.size());
      delta_sum += baseline[t] - permuted;
      ++used;
    }
    mda[f] = used > 0 ? delta_sum / used : 0.0;
  });

  ImportanceReport report;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mda[a] > mda[b]; });
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    report.entries.push_back({data.features.names[order[pos]], mda[order[pos]],
                              static_cast<int>(pos) + 1});
  }
  return report;
}

}  // namespace sessionlens

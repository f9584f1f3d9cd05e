// Command-line front end for the session analytics pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error. Data goes
// to stdout (or --out); diagnostics go to stderr.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sessionlens/errors.hpp"
#include "sessionlens/evaluation.hpp"
#include "sessionlens/events.hpp"
#include "sessionlens/features.hpp"
#include "sessionlens/knowledge.hpp"
#include "sessionlens/models.hpp"
#include "sessionlens/selection.hpp"
#include "sessionlens/session.hpp"
#include "sessionlens/synth.hpp"

namespace {

using namespace sessionlens;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void emit_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    spill(out_path, text);
  }
}

std::map<std::string, double> parse_hyper_overrides(const std::vector<std::string>& pairs) {
  std::map<std::string, double> overrides;
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--hyper wants name=value, got '" + pair + "'");
    }
    try {
      overrides[pair.substr(0, eq)] = std::stod(pair.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--hyper value in '" + pair + "' is not a number");
    }
  }
  return overrides;
}

Grouping parse_grouping(const std::string& text) {
  if (text == "per_topic") return Grouping::kPerTopic;
  if (text == "global") return Grouping::kGlobal;
  throw UsageError("--grouping wants per_topic or global");
}

std::vector<KnowledgeRecord> load_scored_records(const std::string& path) {
  std::vector<KnowledgeRecord> records = load_records(path);
  score_records(records);
  return records;
}

// Common evaluation inputs: feature matrix joined with a labels CSV.
LabeledData load_labeled(const std::string& features_path, const std::string& labels_path,
                         Target task) {
  const FeatureMatrix matrix = load_matrix_csv(features_path);
  const std::vector<KnowledgeRecord> records = parse_labels_csv(slurp(labels_path));
  return make_labeled(matrix, records, task);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// --- subcommand bodies -----------------------------------------------------

struct IngestArgs {
  std::string events, records, serp_prefix;
  double idle_window = 30.0;
};

int run_ingest(const IngestArgs& args) {
  const std::vector<Event> events = parse_event_stream(slurp(args.events));
  AssemblyConfig config;
  config.serp_prefix = args.serp_prefix;
  config.idle_window_s = args.idle_window;
  const std::vector<Session> sessions = assemble_sessions(events, config);

  std::size_t queries = 0, visits = 0, serp_visits = 0;
  for (const auto& s : sessions) {
    queries += s.queries.size();
    visits += s.page_visits.size();
    for (const auto& v : s.page_visits) serp_visits += v.is_serp ? 1 : 0;
  }
  std::cout << "events: " << events.size() << "\n"
            << "sessions: " << sessions.size() << "\n"
            << "queries: " << queries << "\n"
            << "page visits: " << visits << " (" << serp_visits << " SERP, "
            << visits - serp_visits << " content)\n";

  if (!args.records.empty()) {
    const auto records = load_scored_records(args.records);
    const FilterResult filtered = filter_sessions(sessions, records);
    std::cout << "kept: " << filtered.kept.size() << "\n"
              << "rejected: " << filtered.rejected.size() << "\n";
    std::map<std::string, int> by_reason;
    for (const auto& [id, reason] : filtered.rejected) ++by_reason[to_string(reason)];
    for (const auto& [reason, count] : by_reason) {
      std::cout << "  " << reason << ": " << count << "\n";
    }
    for (const auto& [id, reason] : filtered.rejected) {
      std::cout << "  session " << id << ": " << to_string(reason) << "\n";
    }
  }
  return 0;
}

struct LabelArgs {
  std::string records, grouping = "per_topic", out;
};

int run_label(const LabelArgs& args) {
  std::vector<KnowledgeRecord> records = load_scored_records(args.records);
  label_dataset(records, parse_grouping(args.grouping));
  emit_text(args.out, labels_to_csv(records));
  return 0;
}

struct ExtractArgs {
  std::string events, records, lexicon, serp_prefix, out;
  double idle_window = 30.0;
};

int run_extract(const ExtractArgs& args) {
  const std::vector<Event> events = parse_event_stream(slurp(args.events));
  AssemblyConfig config;
  config.serp_prefix = args.serp_prefix;
  config.idle_window_s = args.idle_window;
  const std::vector<Session> sessions = assemble_sessions(events, config);
  const auto records = load_scored_records(args.records);
  const FilterResult filtered = filter_sessions(sessions, records);
  for (const auto& [id, reason] : filtered.rejected) {
    std::cerr << "dropped session " << id << ": " << to_string(reason) << "\n";
  }
  const AoALexicon lexicon = AoALexicon::load(args.lexicon);
  emit_text(args.out, matrix_to_csv(extract_matrix(filtered.kept, lexicon)));
  return 0;
}

struct SelectArgs {
  std::string features, labels, task = "gain", out;
  double threshold = 0.0;
  double tau = 1.0;
};

bool is_relevance_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  return header == "feature,corr_gain,corr_state";
}

int run_select(const SelectArgs& args) {
  const Target target = parse_target(args.task);
  std::vector<std::string> warnings;
  FeatureSubset subset;
  if (is_relevance_table(args.features)) {
    // A precomputed correlation table supports the relevance filter only;
    // redundancy pruning needs the raw columns, and tau = 1.0 drops nothing
    // without exact duplicates.
    if (args.tau < 1.0) {
      throw UsageError("--tau < 1.0 needs a raw feature matrix, not a correlation table");
    }
    subset = relevance_filter(RelevanceTable::load(args.features), target, args.threshold);
    subset.tau = args.tau;
  } else {
    if (args.labels.empty()) {
      throw UsageError("--labels is required when --features is a feature matrix");
    }
    const FeatureMatrix matrix = load_matrix_csv(args.features);
    const std::vector<KnowledgeRecord> records = parse_labels_csv(slurp(args.labels));
    const std::vector<double> gains = make_labeled(matrix, records, Target::kGain).target;
    const std::vector<double> states = make_labeled(matrix, records, Target::kState).target;
    const RelevanceTable table = compute_relevance(matrix, gains, states, &warnings);
    subset = relevance_filter(table, target, args.threshold);
    subset = redundancy_prune(matrix, subset, args.tau, table, target, &warnings);
  }
  print_warnings(warnings);
  std::ostringstream out;
  for (const auto& name : subset.names) out << name << "\n";
  out << subset.names.size() << " features (task " << to_string(target) << ", threshold "
      << args.threshold << ", tau " << args.tau << ")\n";
  emit_text(args.out, out.str());
  return 0;
}

struct EvaluateArgs {
  std::string features, labels, task = "gain", classifier, scope = "per_fold";
  std::string out, out_csv;
  std::vector<std::string> hyper;
  double threshold = 0.0;
  double tau = 1.0;
  int folds = 10, reps = 10;
  std::uint64_t seed = 0;
};

int run_evaluate(const EvaluateArgs& args) {
  const LabeledData data =
      load_labeled(args.features, args.labels, parse_target(args.task));
  const ModelSpec spec = ModelSpec::make(parse_model_kind(args.classifier),
                                         parse_hyper_overrides(args.hyper));
  SelectionConfig selection;
  selection.tau = args.tau;
  selection.threshold = args.threshold;
  selection.scope = parse_scope(args.scope);
  const EvalReport report =
      repeated_cv(data, spec, selection, args.folds, args.reps, args.seed);
  print_warnings(report.warnings);
  emit_text(args.out, report.to_json().dump(2) + "\n");
  if (!args.out_csv.empty()) {
    spill(args.out_csv, EvalReport::csv_header() + "\n" + report.csv_row() + "\n");
  }
  return 0;
}

struct GridArgs {
  std::string features, labels, task = "gain", scope = "per_fold", out_csv;
  std::vector<std::string> classifiers = {"NB", "LR", "SVM", "RF", "MP"};
  std::vector<double> taus = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> thresholds = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  int folds = 10, reps = 10;
  std::uint64_t seed = 0;
};

int run_gridsearch(const GridArgs& args) {
  const LabeledData data =
      load_labeled(args.features, args.labels, parse_target(args.task));
  const SelectionConfig::Scope scope = parse_scope(args.scope);

  std::ostringstream table;
  table << EvalReport::csv_header() << "\n";
  const EvalReport* best = nullptr;
  std::vector<GridResult> results;
  results.reserve(args.classifiers.size());
  for (const auto& name : args.classifiers) {
    const ModelKind kind = parse_model_kind(name);
    results.push_back(grid_search(data, kind, default_grid(kind), args.taus,
                                  args.thresholds, scope, args.folds, args.reps,
                                  args.seed));
    const GridResult& result = results.back();
    for (const auto& report : result.all) table << report.csv_row() << "\n";
    if (best == nullptr || result.best.pooled.accuracy > best->pooled.accuracy ||
        (result.best.pooled.accuracy == best->pooled.accuracy &&
         result.best.pooled.macro.f1 > best->pooled.macro.f1)) {
      best = &result.best;
    }
  }
  std::cout << table.str();
  if (best != nullptr) {
    std::cout << "best: " << to_string(best->kind) << " tau " << best->selection.tau
              << " threshold " << best->selection.threshold << " accuracy "
              << best->pooled.accuracy << " macro_f1 " << best->pooled.macro.f1 << "\n";
  }
  if (!args.out_csv.empty()) spill(args.out_csv, table.str());
  return 0;
}

struct ImportanceArgs {
  std::string features, labels, task = "gain", out;
  std::vector<std::string> hyper;
  std::uint64_t seed = 0;
};

int run_importance(const ImportanceArgs& args) {
  const LabeledData data =
      load_labeled(args.features, args.labels, parse_target(args.task));
  const ModelSpec spec =
      ModelSpec::make(ModelKind::kRF, parse_hyper_overrides(args.hyper));
  emit_text(args.out, mda_importance(data, spec, args.seed).to_csv());
  return 0;
}

struct BaselineArgs {
  std::string features, labels, task = "state", out, out_csv;
  int folds = 10, reps = 10;
  std::uint64_t seed = 0;
};

int run_baseline_ks(const BaselineArgs& args) {
  const LabeledData data =
      load_labeled(args.features, args.labels, parse_target(args.task));
  const ModelSpec spec = ModelSpec::make(ModelKind::kKsZhang);
  const EvalReport report =
      repeated_cv(data, spec, SelectionConfig{}, args.folds, args.reps, args.seed);
  print_warnings(report.warnings);
  emit_text(args.out, report.to_json().dump(2) + "\n");
  if (!args.out_csv.empty()) {
    spill(args.out_csv, EvalReport::csv_header() + "\n" + report.csv_row() + "\n");
  }
  return 0;
}

struct SynthArgs {
  std::string spec, out_events, out_records;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_synth(const SynthArgs& args) {
  GeneratorSpec spec =
      args.spec.empty() ? GeneratorSpec{} : GeneratorSpec::load(args.spec);
  if (args.seed_set) spec.seed = args.seed;
  const SynthResult result = generate(spec);
  spill(args.out_events, serialize_events(result.events));
  spill(args.out_records, records_to_json(result.records));
  std::cout << "wrote " << result.events.size() << " events / "
            << result.records.size() << " records\n";
  return 0;
}

struct DescribeArgs {
  std::string records;
};

int run_describe(const DescribeArgs& args) {
  std::cout << format_topic_summary(describe_topics(load_scored_records(args.records)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search-session analytics: ingest logs, score knowledge tests, "
               "extract behavioral features, select, train, and evaluate."};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse and assemble an event log");
  c_ingest->add_option("--events", ingest.events, "Event log (JSONL)")->required();
  c_ingest->add_option("--serp-prefix", ingest.serp_prefix, "URL prefix marking SERP pages");
  c_ingest->add_option("--idle-window", ingest.idle_window, "Active-time window in seconds");
  c_ingest->add_option("--records", ingest.records,
                       "Knowledge records (JSON); enables participant filtering");

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "Score knowledge records and assign classes");
  c_label->add_option("--records", label.records, "Knowledge records (JSON)")->required();
  c_label->add_option("--grouping", label.grouping, "Standardization grouping")
      ->check(CLI::IsMember({"per_topic", "global"}));
  c_label->add_option("--out", label.out, "Output CSV path (default stdout)");

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Extract the 70-feature matrix");
  c_extract->add_option("--events", extract.events, "Event log (JSONL)")->required();
  c_extract->add_option("--records", extract.records, "Knowledge records (JSON)")->required();
  c_extract->add_option("--lexicon", extract.lexicon, "Age-of-acquisition lexicon CSV")
      ->required();
  c_extract->add_option("--serp-prefix", extract.serp_prefix, "URL prefix marking SERP pages");
  c_extract->add_option("--idle-window", extract.idle_window, "Active-time window in seconds");
  c_extract->add_option("--out", extract.out, "Output CSV path (default stdout)");

  SelectArgs select;
  auto* c_select = app.add_subcommand("select", "Correlation-based feature selection");
  c_select->add_option("--features", select.features,
                       "Feature matrix CSV, or a feature,corr_gain,corr_state table")
      ->required();
  c_select->add_option("--labels", select.labels, "Labels CSV (needed with a matrix)");
  c_select->add_option("--task", select.task, "Prediction target")
      ->check(CLI::IsMember({"gain", "state"}));
  c_select->add_option("--beta,--gamma", select.threshold,
                       "Minimum |correlation| with the target");
  c_select->add_option("--tau", select.tau, "Redundancy threshold on pairwise |correlation|");
  c_select->add_option("--out", select.out, "Output path (default stdout)");

  EvaluateArgs evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "Repeated stratified k-fold CV");
  c_evaluate->add_option("--features", evaluate.features, "Feature matrix CSV")->required();
  c_evaluate->add_option("--labels", evaluate.labels, "Labels CSV")->required();
  c_evaluate->add_option("--task", evaluate.task, "Prediction target")
      ->check(CLI::IsMember({"gain", "state"}));
  c_evaluate->add_option("--classifier", evaluate.classifier, "NB|LR|SVM|RF|MP|KS_Zhang")
      ->required();
  c_evaluate->add_option("--seed", evaluate.seed, "RNG seed")->required();
  c_evaluate->add_option("--folds", evaluate.folds, "Fold count");
  c_evaluate->add_option("--reps", evaluate.reps, "Repetition count");
  c_evaluate->add_option("--tau", evaluate.tau, "Redundancy threshold");
  c_evaluate->add_option("--beta,--gamma,--threshold", evaluate.threshold,
                         "Minimum |correlation| with the target");
  c_evaluate->add_option("--selection-scope", evaluate.scope,
                         "Feature selection scope: per_fold (leakage-safe) or global")
      ->check(CLI::IsMember({"per_fold", "global"}));
  c_evaluate->add_option("--hyper", evaluate.hyper, "Hyperparameter override name=value")
      ->take_all();
  c_evaluate->add_option("--out", evaluate.out, "Report JSON path (default stdout)");
  c_evaluate->add_option("--out-csv", evaluate.out_csv, "Also write the report as a CSV row");

  GridArgs grid;
  auto* c_grid = app.add_subcommand("gridsearch",
                                    "Evaluate hyperparameter x tau x beta grids");
  c_grid->add_option("--features", grid.features, "Feature matrix CSV")->required();
  c_grid->add_option("--labels", grid.labels, "Labels CSV")->required();
  c_grid->add_option("--task", grid.task, "Prediction target")
      ->check(CLI::IsMember({"gain", "state"}));
  c_grid->add_option("--classifiers", grid.classifiers, "Model kinds to sweep")
      ->delimiter(',');
  c_grid->add_option("--taus", grid.taus, "Redundancy thresholds to sweep")->delimiter(',');
  c_grid->add_option("--betas,--gammas", grid.thresholds,
                     "Relevance thresholds to sweep")
      ->delimiter(',');
  c_grid->add_option("--seed", grid.seed, "RNG seed")->required();
  c_grid->add_option("--folds", grid.folds, "Fold count");
  c_grid->add_option("--reps", grid.reps, "Repetition count");
  c_grid->add_option("--selection-scope", grid.scope,
                     "Feature selection scope: per_fold or global")
      ->check(CLI::IsMember({"per_fold", "global"}));
  c_grid->add_option("--out-csv", grid.out_csv, "Write the full table to a CSV file");

  ImportanceArgs importance;
  auto* c_importance = app.add_subcommand("importance",
                                          "Permutation feature importance (mean decrease accuracy)");
  c_importance->add_option("--features", importance.features, "Feature matrix CSV")->required();
  c_importance->add_option("--labels", importance.labels, "Labels CSV")->required();
  c_importance->add_option("--task", importance.task, "Prediction target")
      ->check(CLI::IsMember({"gain", "state"}));
  c_importance->add_option("--seed", importance.seed, "RNG seed")->required();
  c_importance->add_option("--hyper", importance.hyper,
                           "Forest hyperparameter override name=value")
      ->take_all();
  c_importance->add_option("--out", importance.out, "Output CSV path (default stdout)");

  BaselineArgs baseline;
  auto* c_baseline = app.add_subcommand("baseline-ks",
                                        "Score-formula baseline (saved=0, q_term_avg, "
                                        "SERP_click_rank_avg)");
  c_baseline->add_option("--features", baseline.features, "Feature matrix CSV")->required();
  c_baseline->add_option("--labels", baseline.labels, "Labels CSV")->required();
  c_baseline->add_option("--task", baseline.task, "Prediction target")
      ->check(CLI::IsMember({"gain", "state"}));
  c_baseline->add_option("--seed", baseline.seed, "RNG seed");
  c_baseline->add_option("--folds", baseline.folds, "Fold count");
  c_baseline->add_option("--reps", baseline.reps, "Repetition count");
  c_baseline->add_option("--out", baseline.out, "Report JSON path (default stdout)");
  c_baseline->add_option("--out-csv", baseline.out_csv, "Also write the report as a CSV row");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  c_synth->add_option("--spec", synth.spec, "Generator spec (JSON); defaults apply if omitted");
  auto* seed_opt = c_synth->add_option("--seed", synth.seed, "Override the spec's seed");
  c_synth->add_option("--out-events", synth.out_events, "Event log output path (JSONL)")
      ->required();
  c_synth->add_option("--out-records", synth.out_records, "Knowledge records output path (JSON)")
      ->required();

  DescribeArgs describe;
  auto* c_describe = app.add_subcommand("describe", "Per-topic knowledge summary");
  c_describe->add_option("--records", describe.records, "Knowledge records (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_label) return run_label(label);
    if (*c_extract) return run_extract(extract);
    if (*c_select) return run_select(select);
    if (*c_evaluate) return run_evaluate(evaluate);
    if (*c_grid) return run_gridsearch(grid);
    if (*c_importance) return run_importance(importance);
    if (*c_baseline) {
      return run_baseline_ks(baseline);
    }
    if (*c_synth) {
      synth.seed_set = seed_opt->count() > 0;
      return run_synth(synth);
    }
    if (*c_describe) return run_describe(describe);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

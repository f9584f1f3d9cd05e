#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sessionlens/session.hpp"

namespace sessionlens {

inline constexpr std::size_t kFeatureCount = 70;

// Canonical feature order: Session (2), Query (18), SERP (12), Browsing (30),
// Mouse (8). Names and order are stable across runs and match the CSV header.
std::span<const std::string_view, kFeatureCount> canonical_feature_names();

// Index of a canonical feature name, -1 when unknown.
int feature_index(std::string_view name);

// Age-of-acquisition lookup, case-insensitive (keys stored tokenized).
class AoALexicon {
 public:
  AoALexicon() = default;

  // CSV "word,aoa" with a header row.
  static AoALexicon load(const std::string& path);
  static AoALexicon parse(const std::string& csv_text);

  void insert(const std::string& word, double aoa_years);

  // Age in years for an in-vocabulary term, or nullopt.
  std::optional<double> lookup(const std::string& term) const;

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, double> entries_;
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double at_name(std::string_view name) const;
};

struct FeatureMatrix {
  std::vector<std::string> names;  // canonical order
  std::vector<std::pair<std::string, std::string>> row_keys;  // (user_id, topic_id)
  std::vector<FeatureVector> rows;

  std::size_t n_rows() const { return rows.size(); }
  // Column by canonical index, as a plain vector.
  std::vector<double> column(std::size_t feature) const;
};

// Maximum age of acquisition over the query's in-vocabulary terms;
// out-of-vocabulary terms are ignored and an all-OOV query scores 0.
double query_complexity(const Query& query, const AoALexicon& lexicon);

// Seconds of the visit covered by interaction-anchored activity windows.
// The page load and every mouseover/scroll/keypress/serp_click inside
// [enter, exit] each open a [t, t + idle_window] window.
double active_time(const PageVisit& visit, std::span<const Event> session_events,
                   double idle_window_s = 30.0);

// |query_terms intersect target_terms| / |query_terms|.
double term_overlap(const std::set<std::string>& query_terms,
                    const std::set<std::string>& target_terms);

// Computes all 70 features for one filtered session (>= 1 query required).
// Statistics over an empty population (no clicks, no pages, single click
// for the interval) fall back to 0 so vectors stay dense and finite.
FeatureVector extract(const Session& session, const AoALexicon& lexicon);

// One row per session, ordered by (topic_id, user_id).
FeatureMatrix extract_matrix(const std::vector<Session>& sessions, const AoALexicon& lexicon);

// CSV with key columns then the canonical names; values round-trip exactly.
std::string matrix_to_csv(const FeatureMatrix& matrix);
FeatureMatrix parse_matrix_csv(const std::string& text);
FeatureMatrix load_matrix_csv(const std::string& path);

}  // namespace sessionlens

#include "sessionlens/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sessionlens/csv.hpp"
#include "sessionlens/errors.hpp"
#include "sessionlens/text.hpp"

namespace sessionlens {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    // Session
    "s_duration", "s_duration_per_q",
    // Query
    "q_num", "q_term_max", "q_term_min", "q_term_avg", "q_term_total",
    "q_uniq_term_max", "q_uniq_term_min", "q_uniq_term_avg", "q_uniq_term_total",
    "q_uniq_term_ratio", "q_len_first", "q_len_last", "q_uniq_term_first",
    "q_uniq_term_last", "q_complexity_max", "q_complexity_min", "q_complexity_avg",
    "q_complexity_max_diff",
    // SERP
    "SERP_click", "SERP_click_rank_highest", "SERP_click_rank_lowest",
    "SERP_click_rank_avg", "SERP_click_interval", "SERP_click_per_query",
    "SERP_no_click_query_num", "SERP_no_click_query_pct", "SERP_time_total",
    "SERP_time_avg", "SERP_time_max", "SERP_avg_time_to_first_click",
    // Browsing
    "b_num", "b_uniq_num", "b_num_per_q", "b_uniq_num_per_q", "b_time_total",
    "b_time_avg_per_q", "b_time_max_per_page", "b_time_avg_per_page",
    "b_revisited_ratio", "b_num_from_SERP", "b_pct_from_SERP", "b_num_from_non_SERP",
    "b_pct_from_non_SERP", "b_distinct_domain_num", "b_ttl_len_max", "b_ttl_len_min",
    "b_ttl_len_avg", "b_ttl_len_total", "b_page_size_max", "b_page_size_min",
    "b_page_size_avg", "b_page_size_total", "b_ttl_q_overlap_max", "b_ttl_q_overlap_min",
    "b_ttl_q_overlap_avg", "b_ttl_q_overlap_total", "b_url_q_overlap_max",
    "b_url_q_overlap_min", "b_url_q_overlap_avg", "b_url_q_overlap_total",
    // Mouse
    "m_num", "m_num_per_q", "m_rank_max", "m_rank_max_per_q", "m_scroll_dist",
    "m_scroll_dist_per_q", "m_scroll_max_pos", "m_scroll_max_pos_per_q"};

std::string normalize_word(const std::string& word) {
  const auto tokens = tokenize(word);
  if (tokens.empty()) return {};
  std::string out = tokens.front();
  for (std::size_t i = 1; i < tokens.size(); ++i) out += tokens[i];
  return out;
}

// Summary statistics over a population; empty populations report zeros.
struct Stats {
  double maxv = 0.0, minv = 0.0, avg = 0.0, total = 0.0;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  s.maxv = values.front();
  s.minv = values.front();
  for (double v : values) {
    s.maxv = std::max(s.maxv, v);
    s.minv = std::min(s.minv, v);
    s.total += v;
  }
  s.avg = s.total / static_cast<double>(values.size());
  return s;
}

}  // namespace

std::span<const std::string_view, kFeatureCount> canonical_feature_names() {
  return kFeatureNames;
}

int feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double FeatureVector::at_name(std::string_view name) const {
  const int idx = feature_index(name);
  if (idx < 0) throw DataError("unknown feature name '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(idx)];
}

AoALexicon AoALexicon::parse(const std::string& csv_text) {
  const csv::Table table = csv::parse(csv_text);
  const int c_word = table.column("word");
  const int c_aoa = table.column("aoa");
  if (c_word < 0 || c_aoa < 0) throw DataError("AoA lexicon: need 'word,aoa' header");
  AoALexicon lex;
  for (const auto& row : table.rows) {
    double aoa = 0.0;
    try {
      aoa = std::stod(row[c_aoa]);
    } catch (const std::exception&) {
      throw DataError("AoA lexicon: bad aoa value '" + row[c_aoa] + "'");
    }
    lex.insert(row[c_word], aoa);
  }
  return lex;
}

AoALexicon AoALexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void AoALexicon::insert(const std::string& word, double aoa_years) {
  const std::string key = normalize_word(word);
  if (!key.empty()) entries_[key] = aoa_years;
}

std::optional<double> AoALexicon::lookup(const std::string& term) const {
  const auto it = entries_.find(normalize_word(term));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double query_complexity(const Query& query, const AoALexicon& lexicon) {
  double best = 0.0;
  bool any = false;
  for (const auto& term : query.terms) {
    if (const auto aoa = lexicon.lookup(term)) {
      best = any ? std::max(best, *aoa) : *aoa;
      any = true;
    }
  }
  return any ? best : 0.0;
}

double active_time(const PageVisit& visit, std::span<const Event> session_events,
                   double idle_window_s) {
  std::vector<std::int64_t> interactions;
  interactions.push_back(visit.enter_ms);
  for (const auto& event : session_events) {
    const bool interaction = event.kind == EventKind::kMouseover ||
                             event.kind == EventKind::kScroll ||
                             event.kind == EventKind::kKeypress ||
                             event.kind == EventKind::kSerpClick;
    if (interaction && event.timestamp_ms >= visit.enter_ms &&
        event.timestamp_ms <= visit.exit_ms) {
      interactions.push_back(event.timestamp_ms);
    }
  }
  const auto window_ms = static_cast<std::int64_t>(idle_window_s * 1000.0);
  return static_cast<double>(active_ms_from_interactions(visit.enter_ms, visit.exit_ms,
                                                         interactions, window_ms)) /
         1000.0;
}

double term_overlap(const std::set<std::string>& query_terms,
                    const std::set<std::string>& target_terms) {
  if (query_terms.empty()) throw DataError("term_overlap: empty query term set");
  std::size_t hits = 0;
  for (const auto& term : query_terms) {
    if (target_terms.count(term)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(query_terms.size());
}

FeatureVector extract(const Session& session, const AoALexicon& lexicon) {
  if (session.queries.empty()) {
    throw DataError("extract: session '" + session.session_id +
                    "' has no queries (must pass filter_sessions first)");
  }
  const auto& queries = session.queries;
  const double n_q = static_cast<double>(queries.size());

  // Most recent query at or before t; -1 before the first query.
  auto query_at = [&queries](std::int64_t t) {
    int idx = -1;
    for (const auto& q : queries) {
      if (q.timestamp_ms <= t) idx = q.index;
    }
    return idx;
  };

  FeatureVector f;
  auto set = [&f](std::string_view name, double value) {
    f.values[static_cast<std::size_t>(feature_index(name))] = value;
  };

  // --- Session ---
  const double duration_s = session.duration_s();
  set("s_duration", duration_s);
  set("s_duration_per_q", duration_s / n_q);

  // --- Query ---
  std::vector<double> term_counts, uniq_counts, complexities;
  std::set<std::string> all_uniq;
  for (const auto& q : queries) {
    term_counts.push_back(static_cast<double>(q.terms.size()));
    uniq_counts.push_back(static_cast<double>(q.unique_terms.size()));
    complexities.push_back(query_complexity(q, lexicon));
    all_uniq.insert(q.unique_terms.begin(), q.unique_terms.end());
  }
  const Stats terms = stats_of(term_counts);
  const Stats uniqs = stats_of(uniq_counts);
  const Stats cplx = stats_of(complexities);
  set("q_num", n_q);
  set("q_term_max", terms.maxv);
  set("q_term_min", terms.minv);
  set("q_term_avg", terms.avg);
  set("q_term_total", terms.total);
  set("q_uniq_term_max", uniqs.maxv);
  set("q_uniq_term_min", uniqs.minv);
  set("q_uniq_term_avg", uniqs.avg);
  set("q_uniq_term_total", static_cast<double>(all_uniq.size()));
  set("q_uniq_term_ratio", static_cast<double>(all_uniq.size()) / terms.total);
  set("q_len_first", term_counts.front());
  set("q_len_last", term_counts.back());
  set("q_uniq_term_first", uniq_counts.front());
  set("q_uniq_term_last", uniq_counts.back());
  set("q_complexity_max", cplx.maxv);
  set("q_complexity_min", cplx.minv);
  set("q_complexity_avg", cplx.avg);
  set("q_complexity_max_diff", cplx.maxv - cplx.minv);

  // --- SERP ---
  struct Click {
    std::int64_t ts_ms;
    int rank;
    int query_index;          // by time
    std::int64_t render_ts_ms;  // most recent serp_render before the click
  };
  std::vector<Click> clicks;
  std::int64_t last_render_ts = -1;
  for (const auto& event : session.events) {
    if (event.kind == EventKind::kSerpRender) {
      last_render_ts = event.timestamp_ms;
    } else if (event.kind == EventKind::kSerpClick) {
      const auto& payload = std::get<SerpClickPayload>(event.payload);
      clicks.push_back({event.timestamp_ms, payload.rank, query_at(event.timestamp_ms),
                        last_render_ts});
    }
  }
  const double n_clicks = static_cast<double>(clicks.size());
  set("SERP_click", n_clicks);
  if (!clicks.empty()) {
    int highest = clicks.front().rank, lowest = clicks.front().rank;
    double rank_sum = 0.0;
    for (const auto& c : clicks) {
      highest = std::min(highest, c.rank);  // highest rank = top of SERP
      lowest = std::max(lowest, c.rank);
      rank_sum += static_cast<double>(c.rank);
    }
    set("SERP_click_rank_highest", static_cast<double>(highest));
    set("SERP_click_rank_lowest", static_cast<double>(lowest));
    set("SERP_click_rank_avg", rank_sum / n_clicks);
  }
  if (clicks.size() >= 2) {
    const std::int64_t span_ms = clicks.back().ts_ms - clicks.front().ts_ms;
    set("SERP_click_interval",
        static_cast<double>(span_ms) / 1000.0 / (n_clicks - 1.0));
  }
  set("SERP_click_per_query", n_clicks / n_q);

  std::vector<int> clicks_per_query(queries.size(), 0);
  std::vector<std::int64_t> first_click_ms(queries.size(), -1);
  std::vector<std::int64_t> first_click_render_ms(queries.size(), -1);
  for (const auto& c : clicks) {
    if (c.query_index < 0) continue;
    auto qi = static_cast<std::size_t>(c.query_index);
    ++clicks_per_query[qi];
    if (first_click_ms[qi] < 0) {
      first_click_ms[qi] = c.ts_ms;
      first_click_render_ms[qi] = c.render_ts_ms;
    }
  }
  int no_click_queries = 0;
  std::int64_t to_first_click_ms = 0;
  int queries_with_click = 0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    if (clicks_per_query[qi] == 0) {
      ++no_click_queries;
    } else if (first_click_render_ms[qi] >= 0) {
      to_first_click_ms += first_click_ms[qi] - first_click_render_ms[qi];
      ++queries_with_click;
    }
  }
  set("SERP_no_click_query_num", static_cast<double>(no_click_queries));
  set("SERP_no_click_query_pct", static_cast<double>(no_click_queries) / n_q);
  if (queries_with_click > 0) {
    set("SERP_avg_time_to_first_click", static_cast<double>(to_first_click_ms) / 1000.0 /
                                            static_cast<double>(queries_with_click));
  }

  std::int64_t serp_dwell_total_ms = 0, serp_dwell_max_ms = 0;
  for (const auto& visit : session.page_visits) {
    if (!visit.is_serp) continue;
    const std::int64_t dwell = visit.exit_ms - visit.enter_ms;
    serp_dwell_total_ms += dwell;
    serp_dwell_max_ms = std::max(serp_dwell_max_ms, dwell);
  }
  set("SERP_time_total", static_cast<double>(serp_dwell_total_ms) / 1000.0);
  set("SERP_time_avg", static_cast<double>(serp_dwell_total_ms) / 1000.0 / n_q);
  set("SERP_time_max", static_cast<double>(serp_dwell_max_ms) / 1000.0);

  // --- Browsing (non-SERP page visits) ---
  std::vector<const PageVisit*> pages;
  for (const auto& visit : session.page_visits) {
    if (!visit.is_serp) pages.push_back(&visit);
  }
  const double b_num = static_cast<double>(pages.size());
  std::set<std::string> uniq_urls, domains;
  std::int64_t active_total_ms = 0, active_max_ms = 0;
  int from_serp_count = 0;
  std::vector<double> title_lens, page_sizes, ttl_overlaps, url_overlaps;
  for (const PageVisit* page : pages) {
    uniq_urls.insert(page->url);
    domains.insert(page->domain);
    active_total_ms += page->active_ms;
    active_max_ms = std::max(active_max_ms, page->active_ms);
    if (page->from_serp) ++from_serp_count;
    title_lens.push_back(static_cast<double>(codepoint_count(page->title)));
    page_sizes.push_back(static_cast<double>(page->size_bytes));
    if (page->associated_query_index >= 0) {
      const auto& q = queries[static_cast<std::size_t>(page->associated_query_index)];
      ttl_overlaps.push_back(term_overlap(q.unique_terms, unique_terms(tokenize(page->title))));
      url_overlaps.push_back(term_overlap(q.unique_terms, unique_terms(tokenize(page->url))));
    }
  }
  set("b_num", b_num);
  set("b_uniq_num", static_cast<double>(uniq_urls.size()));
  set("b_num_per_q", b_num / n_q);
  set("b_uniq_num_per_q", static_cast<double>(uniq_urls.size()) / n_q);
  const double b_time_total = static_cast<double>(active_total_ms) / 1000.0;
  set("b_time_total", b_time_total);
  set("b_time_avg_per_q", b_time_total / n_q);
  set("b_time_max_per_page", static_cast<double>(active_max_ms) / 1000.0);
  if (!pages.empty()) {
    set("b_time_avg_per_page", b_time_total / b_num);
    set("b_revisited_ratio",
        static_cast<double>(pages.size() - uniq_urls.size()) / b_num);
    set("b_pct_from_SERP", static_cast<double>(from_serp_count) / b_num);
    set("b_pct_from_non_SERP",
        static_cast<double>(pages.size() - static_cast<std::size_t>(from_serp_count)) / b_num);
  }
  set("b_num_from_SERP", static_cast<double>(from_serp_count));
  set("b_num_from_non_SERP", b_num - static_cast<double>(from_serp_count));
  set("b_distinct_domain_num", static_cast<double>(domains.size()));

  const Stats ttl = stats_of(title_lens);
  set("b_ttl_len_max", ttl.maxv);
  set("b_ttl_len_min", ttl.minv);
  set("b_ttl_len_avg", ttl.avg);
  set("b_ttl_len_total", ttl.total);
  const Stats sizes = stats_of(page_sizes);
  set("b_page_size_max", sizes.maxv);
  set("b_page_size_min", sizes.minv);
  set("b_page_size_avg", sizes.avg);
  set("b_page_size_total", sizes.total);
  const Stats ttl_ov = stats_of(ttl_overlaps);
  set("b_ttl_q_overlap_max", ttl_ov.maxv);
  set("b_ttl_q_overlap_min", ttl_ov.minv);
  set("b_ttl_q_overlap_avg", ttl_ov.avg);
  set("b_ttl_q_overlap_total", ttl_ov.total);
  const Stats url_ov = stats_of(url_overlaps);
  set("b_url_q_overlap_max", url_ov.maxv);
  set("b_url_q_overlap_min", url_ov.minv);
  set("b_url_q_overlap_avg", url_ov.avg);
  set("b_url_q_overlap_total", url_ov.total);

  // --- Mouse ---
  int m_num = 0, m_rank_max = 0;
  std::int64_t scroll_dist = 0, scroll_max_pos = 0;
  std::vector<int> query_rank_max(queries.size(), 0);
  std::vector<std::int64_t> query_pos_max(queries.size(), 0);
  for (const auto& event : session.events) {
    if (event.kind == EventKind::kMouseover) {
      const auto& payload = std::get<MouseoverPayload>(event.payload);
      ++m_num;
      m_rank_max = std::max(m_rank_max, payload.rank);
      const int qi = query_at(event.timestamp_ms);
      if (qi >= 0) {
        query_rank_max[static_cast<std::size_t>(qi)] =
            std::max(query_rank_max[static_cast<std::size_t>(qi)], payload.rank);
      }
    } else if (event.kind == EventKind::kScroll) {
      const auto& payload = std::get<ScrollPayload>(event.payload);
      scroll_dist += payload.delta_px < 0 ? -payload.delta_px : payload.delta_px;
      scroll_max_pos = std::max(scroll_max_pos, payload.position_px);
      const int qi = query_at(event.timestamp_ms);
      if (qi >= 0) {
        query_pos_max[static_cast<std::size_t>(qi)] =
            std::max(query_pos_max[static_cast<std::size_t>(qi)], payload.position_px);
      }
    }
  }
  double rank_max_sum = 0.0, pos_max_sum = 0.0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    rank_max_sum += static_cast<double>(query_rank_max[qi]);
    pos_max_sum += static_cast<double>(query_pos_max[qi]);
  }
  set("m_num", static_cast<double>(m_num));
  set("m_num_per_q", static_cast<double>(m_num) / n_q);
  set("m_rank_max", static_cast<double>(m_rank_max));
  set("m_rank_max_per_q", rank_max_sum / n_q);
  set("m_scroll_dist", static_cast<double>(scroll_dist));
  set("m_scroll_dist_per_q", static_cast<double>(scroll_dist) / n_q);
  set("m_scroll_max_pos", static_cast<double>(scroll_max_pos));
  set("m_scroll_max_pos_per_q", pos_max_sum / n_q);

  for (double v : f.values) {
    if (!std::isfinite(v)) {
      throw DataError("extract: non-finite feature value in session '" +
                      session.session_id + "'");
    }
  }
  return f;
}

FeatureMatrix extract_matrix(const std::vector<Session>& sessions, const AoALexicon& lexicon) {
  std::vector<const Session*> ordered;
  ordered.reserve(sessions.size());
  for (const auto& s : sessions) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Session* a, const Session* b) {
    return std::tie(a->topic_id, a->user_id) < std::tie(b->topic_id, b->user_id);
  });

  FeatureMatrix matrix;
  for (const auto name : kFeatureNames) matrix.names.emplace_back(name);
  for (const Session* s : ordered) {
    try {
      matrix.rows.push_back(extract(*s, lexicon));
    } catch (const DataError& e) {
      throw DataError("session '" + s->session_id + "': " + e.what());
    }
    matrix.row_keys.emplace_back(s->user_id, s->topic_id);
  }
  return matrix;
}

std::vector<double> FeatureMatrix::column(std::size_t feature) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][feature];
  return out;
}

std::string matrix_to_csv(const FeatureMatrix& matrix) {
  std::ostringstream os;
  os << "user_id,topic_id";
  for (const auto& name : matrix.names) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    os << csv::quote_field(matrix.row_keys[i].first) << ','
       << csv::quote_field(matrix.row_keys[i].second);
    for (double v : matrix.rows[i].values) os << ',' << csv::format_value(v);
    os << '\n';
  }
  return os.str();
}

FeatureMatrix parse_matrix_csv(const std::string& text) {
  const csv::Table table = csv::parse(text);
  if (table.header.size() != kFeatureCount + 2 || table.header[0] != "user_id" ||
      table.header[1] != "topic_id") {
    throw DataError("feature CSV: expected header user_id,topic_id,<70 canonical names>");
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (table.header[i + 2] != kFeatureNames[i]) {
      throw DataError("feature CSV: column " + std::to_string(i + 2) + " is '" +
                      table.header[i + 2] + "', expected '" +
                      std::string(kFeatureNames[i]) + "'");
    }
  }
  FeatureMatrix matrix;
  for (const auto name : kFeatureNames) matrix.names.emplace_back(name);
  for (const auto& row : table.rows) {
    if (row.size() != kFeatureCount + 2) throw DataError("feature CSV: ragged row");
    FeatureVector v;
    for (std::size_t i = 0; i < kFeatureCount; ++i) v.values[i] = std::stod(row[i + 2]);
    matrix.rows.push_back(v);
    matrix.row_keys.emplace_back(row[0], row[1]);
  }
  return matrix;
}

FeatureMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature CSV: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matrix_csv(buf.str());
}

}  // namespace sessionlens

// Straight-line re-derivation of all 70 features, written independently of
// extract(): intervals are merged explicitly, per-query attribution is
// recomputed from timestamps, and page activity ignores the precomputed
// visit.active_ms. Integer-millisecond bookkeeping keeps equality exact.
// Shared by the feature unit tests and the acceptance checks.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sessionlens/features.hpp"
#include "sessionlens/session.hpp"
#include "sessionlens/text.hpp"

inline std::map<std::string, double> naive_extract(const sessionlens::Session& s,
                                                   const sessionlens::AoALexicon& lex) {
  using namespace sessionlens;
  std::map<std::string, double> f;
  for (const auto name : canonical_feature_names()) f[std::string(name)] = 0.0;
  const std::size_t n_q = s.queries.size();
  const double dn_q = static_cast<double>(n_q);

  auto query_before = [&](std::int64_t t) {
    int best = -1;
    for (std::size_t i = 0; i < n_q; ++i) {
      if (s.queries[i].timestamp_ms <= t) best = static_cast<int>(i);
    }
    return best;
  };

  // Session.
  const double duration = static_cast<double>(s.end_ms - s.start_ms) / 1000.0;
  f["s_duration"] = duration;
  f["s_duration_per_q"] = duration / dn_q;

  // Query block.
  {
    std::vector<double> lens, uniqs, cplx;
    std::set<std::string> all_terms;
    for (const auto& q : s.queries) {
      lens.push_back(static_cast<double>(q.terms.size()));
      std::set<std::string> u(q.terms.begin(), q.terms.end());
      uniqs.push_back(static_cast<double>(u.size()));
      all_terms.insert(u.begin(), u.end());
      double best = 0.0;
      bool seen = false;
      for (const auto& term : q.terms) {
        if (auto a = lex.lookup(term)) {
          if (!seen || *a > best) best = *a;
          seen = true;
        }
      }
      cplx.push_back(best);
    }
    auto fill = [&](const std::string& prefix, const std::vector<double>& v) {
      double mx = v.front(), mn = v.front(), total = 0.0;
      for (double x : v) {
        mx = std::max(mx, x);
        mn = std::min(mn, x);
        total += x;
      }
      f[prefix + "_max"] = mx;
      f[prefix + "_min"] = mn;
      f[prefix + "_avg"] = total / static_cast<double>(v.size());
      if (prefix != "q_complexity") f[prefix + "_total"] = total;
      return mx - mn;
    };
    f["q_num"] = dn_q;
    fill("q_term", lens);
    fill("q_uniq_term", uniqs);
    f["q_uniq_term_total"] = static_cast<double>(all_terms.size());
    double term_total = 0.0;
    for (double x : lens) term_total += x;
    f["q_uniq_term_ratio"] = static_cast<double>(all_terms.size()) / term_total;
    f["q_len_first"] = lens.front();
    f["q_len_last"] = lens.back();
    f["q_uniq_term_first"] = uniqs.front();
    f["q_uniq_term_last"] = uniqs.back();
    f["q_complexity_max_diff"] = fill("q_complexity", cplx);
  }

  // SERP block from the raw event list.
  {
    struct NaiveClick {
      std::int64_t ts, render_ts;
      int rank, query;
    };
    std::vector<NaiveClick> clicks;
    std::int64_t render = -1;
    for (const auto& e : s.events) {
      if (e.kind == EventKind::kSerpRender) render = e.timestamp_ms;
      if (e.kind == EventKind::kSerpClick) {
        const auto& p = std::get<SerpClickPayload>(e.payload);
        clicks.push_back({e.timestamp_ms, render, p.rank, query_before(e.timestamp_ms)});
      }
    }
    f["SERP_click"] = static_cast<double>(clicks.size());
    if (!clicks.empty()) {
      int hi = clicks[0].rank, lo = clicks[0].rank;
      double sum = 0.0;
      for (const auto& c : clicks) {
        hi = std::min(hi, c.rank);
        lo = std::max(lo, c.rank);
        sum += c.rank;
      }
      f["SERP_click_rank_highest"] = hi;
      f["SERP_click_rank_lowest"] = lo;
      f["SERP_click_rank_avg"] = sum / static_cast<double>(clicks.size());
    }
    if (clicks.size() > 1) {
      f["SERP_click_interval"] = static_cast<double>(clicks.back().ts - clicks.front().ts) /
                                 1000.0 / static_cast<double>(clicks.size() - 1);
    }
    f["SERP_click_per_query"] = static_cast<double>(clicks.size()) / dn_q;

    int without_click = 0, with_click = 0;
    std::int64_t wait_ms = 0;
    for (std::size_t qi = 0; qi < n_q; ++qi) {
      const NaiveClick* first = nullptr;
      for (const auto& c : clicks) {
        if (c.query == static_cast<int>(qi)) {
          first = &c;
          break;
        }
      }
      if (first == nullptr) {
        ++without_click;
      } else if (first->render_ts >= 0) {
        wait_ms += first->ts - first->render_ts;
        ++with_click;
      }
    }
    f["SERP_no_click_query_num"] = without_click;
    f["SERP_no_click_query_pct"] = static_cast<double>(without_click) / dn_q;
    if (with_click > 0) {
      f["SERP_avg_time_to_first_click"] =
          static_cast<double>(wait_ms) / 1000.0 / static_cast<double>(with_click);
    }
    std::int64_t serp_total = 0, serp_max = 0;
    for (const auto& v : s.page_visits) {
      if (v.is_serp) {
        serp_total += v.exit_ms - v.enter_ms;
        serp_max = std::max(serp_max, v.exit_ms - v.enter_ms);
      }
    }
    f["SERP_time_total"] = static_cast<double>(serp_total) / 1000.0;
    f["SERP_time_avg"] = static_cast<double>(serp_total) / 1000.0 / dn_q;
    f["SERP_time_max"] = static_cast<double>(serp_max) / 1000.0;
  }

  // Browsing block; page activity via explicit interval merging.
  {
    auto naive_active_ms = [&](const PageVisit& v) {
      std::vector<std::pair<std::int64_t, std::int64_t>> spans;
      auto add = [&](std::int64_t t) {
        const std::int64_t lo = std::max(t, v.enter_ms);
        const std::int64_t hi = std::min(t + 30000, v.exit_ms);
        if (hi > lo) spans.emplace_back(lo, hi);
      };
      add(v.enter_ms);
      for (const auto& e : s.events) {
        const bool interactive =
            e.kind == EventKind::kMouseover || e.kind == EventKind::kScroll ||
            e.kind == EventKind::kKeypress || e.kind == EventKind::kSerpClick;
        if (interactive && e.timestamp_ms >= v.enter_ms && e.timestamp_ms <= v.exit_ms) {
          add(e.timestamp_ms);
        }
      }
      std::sort(spans.begin(), spans.end());
      std::int64_t total = 0, reach = -1;
      for (const auto& [lo, hi] : spans) {
        if (lo >= reach) {
          total += hi - lo;
          reach = hi;
        } else if (hi > reach) {
          total += hi - reach;
          reach = hi;
        }
      }
      return total;
    };

    std::vector<const PageVisit*> pages;
    for (const auto& v : s.page_visits) {
      if (!v.is_serp) pages.push_back(&v);
    }
    const double n_p = static_cast<double>(pages.size());
    std::set<std::string> urls, doms;
    std::int64_t act_total = 0, act_max = 0;
    double from_serp = 0.0;
    std::vector<double> tl, sz, tov, uov;
    for (const auto* p : pages) {
      urls.insert(p->url);
      doms.insert(domain_of_url(p->url));
      const std::int64_t a = naive_active_ms(*p);
      act_total += a;
      act_max = std::max(act_max, a);
      if (p->from_serp) from_serp += 1.0;
      tl.push_back(static_cast<double>(codepoint_count(p->title)));
      sz.push_back(static_cast<double>(p->size_bytes));
      const int qi = query_before(p->enter_ms);
      if (qi >= 0) {
        const auto& terms = s.queries[static_cast<std::size_t>(qi)].unique_terms;
        auto ratio = [&](const std::string& text) {
          const auto toks = tokenize(text);
          const std::set<std::string> bag(toks.begin(), toks.end());
          std::size_t inter = 0;
          for (const auto& t : terms) inter += bag.count(t);
          return static_cast<double>(inter) / static_cast<double>(terms.size());
        };
        tov.push_back(ratio(p->title));
        uov.push_back(ratio(p->url));
      }
    }
    f["b_num"] = n_p;
    f["b_uniq_num"] = static_cast<double>(urls.size());
    f["b_num_per_q"] = n_p / dn_q;
    f["b_uniq_num_per_q"] = static_cast<double>(urls.size()) / dn_q;
    const double total_s = static_cast<double>(act_total) / 1000.0;
    f["b_time_total"] = total_s;
    f["b_time_avg_per_q"] = total_s / dn_q;
    f["b_time_max_per_page"] = static_cast<double>(act_max) / 1000.0;
    if (!pages.empty()) {
      f["b_time_avg_per_page"] = total_s / n_p;
      f["b_revisited_ratio"] = (n_p - static_cast<double>(urls.size())) / n_p;
      f["b_pct_from_SERP"] = from_serp / n_p;
      f["b_pct_from_non_SERP"] = (n_p - from_serp) / n_p;
    }
    f["b_num_from_SERP"] = from_serp;
    f["b_num_from_non_SERP"] = n_p - from_serp;
    f["b_distinct_domain_num"] = static_cast<double>(doms.size());
    auto fill = [&](const std::string& prefix, const std::vector<double>& v) {
      if (v.empty()) return;
      double mx = v.front(), mn = v.front(), total = 0.0;
      for (double x : v) {
        mx = std::max(mx, x);
        mn = std::min(mn, x);
        total += x;
      }
      f[prefix + "_max"] = mx;
      f[prefix + "_min"] = mn;
      f[prefix + "_avg"] = total / static_cast<double>(v.size());
      f[prefix + "_total"] = total;
    };
    fill("b_ttl_len", tl);
    fill("b_page_size", sz);
    fill("b_ttl_q_overlap", tov);
    fill("b_url_q_overlap", uov);
  }

  // Mouse block.
  {
    double m_num = 0.0, rank_max = 0.0;
    std::int64_t dist = 0, pos_max = 0;
    std::vector<double> rank_per_q(n_q, 0.0);
    std::vector<std::int64_t> pos_per_q(n_q, 0);
    for (const auto& e : s.events) {
      if (e.kind == EventKind::kMouseover) {
        const int rank = std::get<MouseoverPayload>(e.payload).rank;
        m_num += 1.0;
        rank_max = std::max(rank_max, static_cast<double>(rank));
        const int qi = query_before(e.timestamp_ms);
        if (qi >= 0) {
          rank_per_q[static_cast<std::size_t>(qi)] =
              std::max(rank_per_q[static_cast<std::size_t>(qi)], static_cast<double>(rank));
        }
      }
      if (e.kind == EventKind::kScroll) {
        const auto& p = std::get<ScrollPayload>(e.payload);
        dist += p.delta_px < 0 ? -p.delta_px : p.delta_px;
        pos_max = std::max(pos_max, p.position_px);
        const int qi = query_before(e.timestamp_ms);
        if (qi >= 0) {
          pos_per_q[static_cast<std::size_t>(qi)] =
              std::max(pos_per_q[static_cast<std::size_t>(qi)], p.position_px);
        }
      }
    }
    double rank_sum = 0.0, pos_sum = 0.0;
    for (std::size_t qi = 0; qi < n_q; ++qi) {
      rank_sum += rank_per_q[qi];
      pos_sum += static_cast<double>(pos_per_q[qi]);
    }
    f["m_num"] = m_num;
    f["m_num_per_q"] = m_num / dn_q;
    f["m_rank_max"] = rank_max;
    f["m_rank_max_per_q"] = rank_sum / dn_q;
    f["m_scroll_dist"] = static_cast<double>(dist);
    f["m_scroll_dist_per_q"] = static_cast<double>(dist) / dn_q;
    f["m_scroll_max_pos"] = static_cast<double>(pos_max);
    f["m_scroll_max_pos_per_q"] = pos_sum / dn_q;
  }
  return f;
}

// Hand-computed values for the bundled sample session, one per feature.
inline const std::map<std::string, double>& s1_expected_features() {
  static const std::map<std::string, double> expected = {
      {"s_duration", 200.0},
      {"s_duration_per_q", 100.0},
      {"q_num", 2.0},
      {"q_term_max", 4.0},
      {"q_term_min", 3.0},
      {"q_term_avg", 3.5},
      {"q_term_total", 7.0},
      {"q_uniq_term_max", 4.0},
      {"q_uniq_term_min", 3.0},
      {"q_uniq_term_avg", 3.5},
      {"q_uniq_term_total", 5.0},
      {"q_uniq_term_ratio", 5.0 / 7.0},
      {"q_len_first", 3.0},
      {"q_len_last", 4.0},
      {"q_uniq_term_first", 3.0},
      {"q_uniq_term_last", 4.0},
      {"q_complexity_max", 10.1},
      {"q_complexity_min", 10.1},
      {"q_complexity_avg", 10.1},
      {"q_complexity_max_diff", 0.0},
      {"SERP_click", 2.0},
      {"SERP_click_rank_highest", 1.0},
      {"SERP_click_rank_lowest", 3.0},
      {"SERP_click_rank_avg", 2.0},
      {"SERP_click_interval", 85.0},
      {"SERP_click_per_query", 1.0},
      {"SERP_no_click_query_num", 0.0},
      {"SERP_no_click_query_pct", 0.0},
      {"SERP_time_total", 0.0},
      {"SERP_time_avg", 0.0},
      {"SERP_time_max", 0.0},
      {"SERP_avg_time_to_first_click", 12.5},
      {"b_num", 2.0},
      {"b_uniq_num", 2.0},
      {"b_num_per_q", 1.0},
      {"b_uniq_num_per_q", 1.0},
      {"b_time_total", 90.0},
      {"b_time_avg_per_q", 45.0},
      {"b_time_max_per_page", 60.0},
      {"b_time_avg_per_page", 45.0},
      {"b_revisited_ratio", 0.0},
      {"b_num_from_SERP", 2.0},
      {"b_pct_from_SERP", 1.0},
      {"b_num_from_non_SERP", 0.0},
      {"b_pct_from_non_SERP", 0.0},
      {"b_distinct_domain_num", 2.0},
      {"b_ttl_len_max", 33.0},
      {"b_ttl_len_min", 29.0},
      {"b_ttl_len_avg", 31.0},
      {"b_ttl_len_total", 62.0},
      {"b_page_size_max", 50000.0},
      {"b_page_size_min", 30000.0},
      {"b_page_size_avg", 40000.0},
      {"b_page_size_total", 80000.0},
      {"b_ttl_q_overlap_max", 0.75},
      {"b_ttl_q_overlap_min", 2.0 / 3.0},
      {"b_ttl_q_overlap_avg", (2.0 / 3.0 + 0.75) / 2.0},
      {"b_ttl_q_overlap_total", 2.0 / 3.0 + 0.75},
      {"b_url_q_overlap_max", 2.0 / 3.0},
      {"b_url_q_overlap_min", 0.5},
      {"b_url_q_overlap_avg", (2.0 / 3.0 + 0.5) / 2.0},
      {"b_url_q_overlap_total", 2.0 / 3.0 + 0.5},
      {"m_num", 1.0},
      {"m_num_per_q", 0.5},
      {"m_rank_max", 2.0},
      {"m_rank_max_per_q", 1.0},
      {"m_scroll_dist", 800.0},
      {"m_scroll_dist_per_q", 400.0},
      {"m_scroll_max_pos", 600.0},
      {"m_scroll_max_pos_per_q", 300.0},
  };
  return expected;
}

#include "sessionlens/session.hpp"

#include <algorithm>
#include <map>

#include "sessionlens/errors.hpp"
#include "sessionlens/text.hpp"

namespace sessionlens {

namespace {

bool matches_prefix(const std::string& url, const std::string& prefix) {
  return !prefix.empty() && url.rfind(prefix, 0) == 0;
}

bool is_interaction_kind(EventKind kind) {
  return kind == EventKind::kMouseover || kind == EventKind::kScroll ||
         kind == EventKind::kKeypress || kind == EventKind::kSerpClick;
}

}  // namespace

std::int64_t active_ms_from_interactions(std::int64_t enter_ms, std::int64_t exit_ms,
                                         const std::vector<std::int64_t>& interaction_ts_ms,
                                         std::int64_t window_ms) {
  if (exit_ms <= enter_ms || interaction_ts_ms.empty()) return 0;
  std::vector<std::int64_t> ts = interaction_ts_ms;
  std::sort(ts.begin(), ts.end());
  std::int64_t active = 0;
  std::int64_t covered_until = enter_ms;  // union measured left to right
  for (std::int64_t t : ts) {
    const std::int64_t lo = std::max({t, enter_ms, covered_until});
    const std::int64_t hi = std::min(t + window_ms, exit_ms);
    if (hi > lo) {
      active += hi - lo;
      covered_until = hi;
    }
  }
  return active;
}

std::vector<Session> assemble_sessions(const std::vector<Event>& events,
                                       const AssemblyConfig& config) {
  std::map<std::string, std::vector<Event>> grouped;
  for (const auto& event : events) grouped[event.session_id].push_back(event);

  const auto window_ms = static_cast<std::int64_t>(config.idle_window_s * 1000.0);

  std::vector<Session> sessions;
  sessions.reserve(grouped.size());
  for (auto& [session_id, session_events] : grouped) {
    std::stable_sort(session_events.begin(), session_events.end(),
                     [](const Event& a, const Event& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });

    Session session;
    session.session_id = session_id;
    const std::size_t colon = session_id.find(':');
    if (colon == std::string::npos) {
      session.user_id = session_id;
      session.topic_id = "default";
    } else {
      session.user_id = session_id.substr(0, colon);
      session.topic_id = session_id.substr(colon + 1);
    }
    session.events = std::move(session_events);
    session.start_ms = session.events.front().timestamp_ms;
    session.end_ms = session.events.back().timestamp_ms;

    int last_result_count = -1;  // -1: no serp_render seen yet
    std::vector<PageVisit> open;  // visits without a page_leave yet
    for (const auto& event : session.events) {
      switch (event.kind) {
        case EventKind::kQuery: {
          const auto& payload = std::get<QueryPayload>(event.payload);
          Query q;
          q.text = payload.text;
          q.terms = tokenize(payload.text);
          if (q.terms.empty()) break;  // no alphanumeric content
          q.unique_terms = unique_terms(q.terms);
          q.timestamp_ms = event.timestamp_ms;
          q.index = static_cast<int>(session.queries.size());
          session.queries.push_back(std::move(q));
          break;
        }
        case EventKind::kSerpRender: {
          last_result_count = std::get<SerpRenderPayload>(event.payload).result_count;
          break;
        }
        case EventKind::kSerpClick: {
          const auto& payload = std::get<SerpClickPayload>(event.payload);
          if (last_result_count < 0) {
            throw ValidationError("session '" + session_id +
                                  "': serp_click with no preceding serp_render");
          }
          if (payload.rank > last_result_count) {
            throw ValidationError("session '" + session_id + "': serp_click rank " +
                                  std::to_string(payload.rank) + " exceeds result count " +
                                  std::to_string(last_result_count));
          }
          break;
        }
        case EventKind::kPageLoad: {
          const auto& payload = std::get<PageLoadPayload>(event.payload);
          PageVisit visit;
          visit.url = payload.url;
          visit.title = payload.title;
          visit.size_bytes = payload.size_bytes;
          visit.domain = domain_of_url(payload.url);
          visit.enter_ms = event.timestamp_ms;
          visit.exit_ms = session.end_ms;  // provisional; page_leave may close it
          visit.is_serp = matches_prefix(payload.url, config.serp_prefix);
          visit.from_serp = matches_prefix(payload.referrer_url, config.serp_prefix);
          visit.associated_query_index = -1;
          for (const auto& q : session.queries) {
            if (q.timestamp_ms <= event.timestamp_ms) {
              visit.associated_query_index = q.index;
            }
          }
          open.push_back(std::move(visit));
          break;
        }
        case EventKind::kPageLeave: {
          const auto& payload = std::get<PageLeavePayload>(event.payload);
          // Close the most recently opened visit with the same URL; a leave
          // without a matching open visit is ignored.
          for (auto it = open.rbegin(); it != open.rend(); ++it) {
            if (it->url == payload.url) {
              it->exit_ms = event.timestamp_ms;
              session.page_visits.push_back(*it);
              open.erase(std::next(it).base());
              break;
            }
          }
          break;
        }
        default:
          break;
      }
    }
    // Unclosed visits clip at session end.
    for (auto& visit : open) session.page_visits.push_back(visit);
    std::stable_sort(session.page_visits.begin(), session.page_visits.end(),
                     [](const PageVisit& a, const PageVisit& b) {
                       return a.enter_ms < b.enter_ms;
                     });

    for (auto& visit : session.page_visits) {
      std::vector<std::int64_t> interactions;
      interactions.push_back(visit.enter_ms);  // the page_load itself
      for (const auto& event : session.events) {
        if (is_interaction_kind(event.kind) && event.timestamp_ms >= visit.enter_ms &&
            event.timestamp_ms <= visit.exit_ms) {
          interactions.push_back(event.timestamp_ms);
        }
      }
      visit.active_ms =
          active_ms_from_interactions(visit.enter_ms, visit.exit_ms, interactions, window_ms);
    }

    sessions.push_back(std::move(session));
  }
  return sessions;  // std::map iteration gives ascending session_id
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kMissingRecord: return "missing_record";
    case RejectReason::kNoQueries: return "no_queries";
    case RejectReason::kStraightLining: return "straight_lining";
    case RejectReason::kIncompletePost: return "incomplete_post";
  }
  return "unknown";
}

namespace {

// All answers are the same TRUE/FALSE option. All-IDK does not count;
// an empty answer list does not count either.
bool straight_lined(const std::vector<ItemAnswer>& answers) {
  if (answers.empty()) return false;
  const Answer first = answers.front().answer;
  if (first == Answer::kIdk) return false;
  for (const auto& a : answers) {
    if (a.answer != first) return false;
  }
  return true;
}

}  // namespace

FilterResult filter_sessions(const std::vector<Session>& sessions,
                             const std::vector<KnowledgeRecord>& records) {
  std::map<std::pair<std::string, std::string>, const KnowledgeRecord*> by_key;
  for (const auto& r : records) by_key[{r.user_id, r.topic_id}] = &r;

  FilterResult result;
  for (const auto& session : sessions) {
    auto it = by_key.find({session.user_id, session.topic_id});
    if (it == by_key.end()) {
      result.rejected.emplace_back(session.session_id, RejectReason::kMissingRecord);
      continue;
    }
    const KnowledgeRecord& record = *it->second;
    if (session.queries.empty()) {
      result.rejected.emplace_back(session.session_id, RejectReason::kNoQueries);
      continue;
    }
    if (straight_lined(record.pre_answers) || straight_lined(record.post_answers)) {
      result.rejected.emplace_back(session.session_id, RejectReason::kStraightLining);
      continue;
    }
    if (record.post_answers.empty()) {
      result.rejected.emplace_back(session.session_id, RejectReason::kIncompletePost);
      continue;
    }
    result.kept.push_back(session);
  }
  return result;
}

}  // namespace sessionlens

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sessionlens/events.hpp"
#include "sessionlens/knowledge.hpp"

namespace sessionlens {

// One submitted query with its token breakdown. Query events whose text
// contains no alphanumeric content do not produce a Query.
struct Query {
  std::string text;
  std::vector<std::string> terms;
  std::set<std::string> unique_terms;
  std::int64_t timestamp_ms = 0;
  int index = 0;  // 0-based position among the session's queries
};

struct PageVisit {
  std::string url;
  std::string title;
  std::int64_t size_bytes = 0;
  std::string domain;
  std::int64_t enter_ms = 0;
  std::int64_t exit_ms = 0;
  std::int64_t active_ms = 0;  // window-union active time, see active_time()
  bool from_serp = false;      // referrer matches the SERP prefix
  bool is_serp = false;        // url matches the SERP prefix
  int associated_query_index = -1;  // most recent query before enter, -1 if none

  double dwell_s() const { return static_cast<double>(exit_ms - enter_ms) / 1000.0; }
  double active_s() const { return static_cast<double>(active_ms) / 1000.0; }
};

// Ordered events of one user on one topic, with derived queries and visits.
struct Session {
  std::string session_id;
  std::string user_id;
  std::string topic_id;
  std::vector<Event> events;  // non-decreasing timestamps
  std::vector<Query> queries;
  std::vector<PageVisit> page_visits;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  double duration_s() const { return static_cast<double>(end_ms - start_ms) / 1000.0; }
};

struct AssemblyConfig {
  // URL prefix identifying SERP pages; the empty prefix matches nothing.
  std::string serp_prefix;
  // Inactivity window for active-time computation, in seconds.
  double idle_window_s = 30.0;
};

// Measure of ([t, t+window] for each interaction t) intersected with
// [enter, exit], all in integer milliseconds so any correct evaluation
// order yields the identical result.
std::int64_t active_ms_from_interactions(std::int64_t enter_ms, std::int64_t exit_ms,
                                         const std::vector<std::int64_t>& interaction_ts_ms,
                                         std::int64_t window_ms);

// Groups events by session_id, sorts by timestamp (stable on ties), derives
// queries and page visits, and closes dangling page visits at session end.
// session_id "user:topic" provides user_id/topic_id; without a colon the
// whole id is the user and the topic is "default". Sessions come back in
// ascending session_id order. Throws ValidationError for a serp_click with
// no preceding serp_render or with a rank beyond the rendered result count.
std::vector<Session> assemble_sessions(const std::vector<Event>& events,
                                       const AssemblyConfig& config = {});

enum class RejectReason {
  kMissingRecord,
  kNoQueries,
  kStraightLining,
  kIncompletePost,
};

const char* to_string(RejectReason reason);

struct FilterResult {
  std::vector<Session> kept;
  std::vector<std::pair<std::string, RejectReason>> rejected;  // (session_id, reason)
};

// Participant filtering: drops sessions with no queries, sessions whose
// record answered every pre-test or every post-test item with the same
// TRUE/FALSE option, and sessions without post-test answers. Sessions with
// no matching record (by user_id+topic_id) are rejected, not fatal.
FilterResult filter_sessions(const std::vector<Session>& sessions,
                             const std::vector<KnowledgeRecord>& records);

}  // namespace sessionlens

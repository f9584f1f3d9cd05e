#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace sessionlens {

enum class EventKind {
  kQuery,
  kSerpRender,
  kSerpClick,
  kPageLoad,
  kPageLeave,
  kMouseover,
  kScroll,
  kKeypress,
};

const char* to_string(EventKind kind);
bool event_kind_from_string(const std::string& name, EventKind& out);

struct QueryPayload {
  std::string text;
};

struct SerpResult {
  int rank = 0;  // 1-based
  std::string url;
  std::string title;
};

struct SerpRenderPayload {
  int query_index = 0;  // 0-based
  int result_count = 0;
  std::vector<SerpResult> results;
};

struct SerpClickPayload {
  int rank = 0;
  std::string url;
};

struct PageLoadPayload {
  std::string url;
  std::string title;
  std::int64_t size_bytes = 0;
  std::string referrer_url;  // may be empty
};

struct PageLeavePayload {
  std::string url;
};

struct MouseoverPayload {
  int rank = 0;  // SERP result rank under cursor
};

struct ScrollPayload {
  std::int64_t delta_px = 0;  // signed
  std::int64_t position_px = 0;
};

struct KeypressPayload {};

using EventPayload =
    std::variant<QueryPayload, SerpRenderPayload, SerpClickPayload, PageLoadPayload,
                 PageLeavePayload, MouseoverPayload, ScrollPayload, KeypressPayload>;

// One timestamped user interaction, as logged by the search platform.
struct Event {
  std::string session_id;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::kQuery;
  EventPayload payload;
};

// Parses a JSON-object-per-line event log. Events come back in file order;
// unknown fields are ignored; empty lines are skipped. Throws ParseError
// (malformed JSON, 1-based line number) or SchemaError (unknown kind,
// missing/invalid payload field).
std::vector<Event> parse_event_stream(const std::string& raw);

// Inverse of parse_event_stream: one JSON object per line, trailing newline.
// parse(serialize(events)) reproduces every field.
std::string serialize_events(const std::vector<Event>& events);

std::string serialize_event(const Event& event);

}  // namespace sessionlens

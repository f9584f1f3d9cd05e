#include "sessionlens/events.hpp"

#include <json.hpp>

#include "sessionlens/errors.hpp"

namespace sessionlens {

using nlohmann::json;

namespace {

struct KindName {
  EventKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {EventKind::kQuery, "query"},
    {EventKind::kSerpRender, "serp_render"},
    {EventKind::kSerpClick, "serp_click"},
    {EventKind::kPageLoad, "page_load"},
    {EventKind::kPageLeave, "page_leave"},
    {EventKind::kMouseover, "mouseover"},
    {EventKind::kScroll, "scroll"},
    {EventKind::kKeypress, "keypress"},
};

template <typename T>
T require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(line, std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(line, std::string("field '") + key + "' has wrong type");
  }
}

int require_rank(const json& obj, const char* key, std::size_t line) {
  const int rank = require<int>(obj, key, line);
  if (rank < 1) throw SchemaError(line, std::string(key) + " must be >= 1");
  return rank;
}

EventPayload parse_payload(EventKind kind, const json& p, std::size_t line) {
  switch (kind) {
    case EventKind::kQuery:
      return QueryPayload{require<std::string>(p, "text", line)};
    case EventKind::kSerpRender: {
      SerpRenderPayload payload;
      payload.query_index = require<int>(p, "query_index", line);
      if (payload.query_index < 0) throw SchemaError(line, "query_index must be >= 0");
      payload.result_count = require<int>(p, "result_count", line);
      if (payload.result_count < 0) throw SchemaError(line, "result_count must be >= 0");
      if (auto it = p.find("results"); it != p.end()) {
        if (!it->is_array()) throw SchemaError(line, "results must be an array");
        for (const auto& r : *it) {
          SerpResult result;
          result.rank = require_rank(r, "rank", line);
          result.url = require<std::string>(r, "url", line);
          result.title = require<std::string>(r, "title", line);
          payload.results.push_back(std::move(result));
        }
      }
      return payload;
    }
    case EventKind::kSerpClick: {
      SerpClickPayload payload;
      payload.rank = require_rank(p, "rank", line);
      payload.url = require<std::string>(p, "url", line);
      return payload;
    }
    case EventKind::kPageLoad: {
      PageLoadPayload payload;
      payload.url = require<std::string>(p, "url", line);
      payload.title = require<std::string>(p, "title", line);
      payload.size_bytes = require<std::int64_t>(p, "size_bytes", line);
      if (payload.size_bytes < 0) throw SchemaError(line, "size_bytes must be >= 0");
      payload.referrer_url = require<std::string>(p, "referrer_url", line);
      return payload;
    }
    case EventKind::kPageLeave:
      return PageLeavePayload{require<std::string>(p, "url", line)};
    case EventKind::kMouseover:
      return MouseoverPayload{require_rank(p, "rank", line)};
    case EventKind::kScroll: {
      ScrollPayload payload;
      payload.delta_px = require<std::int64_t>(p, "delta_px", line);
      payload.position_px = require<std::int64_t>(p, "position_px", line);
      if (payload.position_px < 0) throw SchemaError(line, "position_px must be >= 0");
      return payload;
    }
    case EventKind::kKeypress:
      return KeypressPayload{};
  }
  throw SchemaError(line, "unhandled event kind");
}

json payload_to_json(const Event& event) {
  json p = json::object();
  std::visit(
      [&p](const auto& payload) {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, QueryPayload>) {
          p["text"] = payload.text;
        } else if constexpr (std::is_same_v<T, SerpRenderPayload>) {
          p["query_index"] = payload.query_index;
          p["result_count"] = payload.result_count;
          json results = json::array();
          for (const auto& r : payload.results) {
            results.push_back({{"rank", r.rank}, {"url", r.url}, {"title", r.title}});
          }
          p["results"] = std::move(results);
        } else if constexpr (std::is_same_v<T, SerpClickPayload>) {
          p["rank"] = payload.rank;
          p["url"] = payload.url;
        } else if constexpr (std::is_same_v<T, PageLoadPayload>) {
          p["url"] = payload.url;
          p["title"] = payload.title;
          p["size_bytes"] = payload.size_bytes;
          p["referrer_url"] = payload.referrer_url;
        } else if constexpr (std::is_same_v<T, PageLeavePayload>) {
          p["url"] = payload.url;
        } else if constexpr (std::is_same_v<T, MouseoverPayload>) {
          p["rank"] = payload.rank;
        } else if constexpr (std::is_same_v<T, ScrollPayload>) {
          p["delta_px"] = payload.delta_px;
          p["position_px"] = payload.position_px;
        } else if constexpr (std::is_same_v<T, KeypressPayload>) {
          // empty payload
        }
      },
      event.payload);
  return p;
}

}  // namespace

const char* to_string(EventKind kind) {
  for (const auto& entry : kKindNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

bool event_kind_from_string(const std::string& name, EventKind& out) {
  for (const auto& entry : kKindNames) {
    if (name == entry.name) {
      out = entry.kind;
      return true;
    }
  }
  return false;
}

std::vector<Event> parse_event_stream(const std::string& raw) {
  std::vector<Event> events;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t end = raw.find('\n', pos);
    if (end == std::string::npos) end = raw.size();
    ++line_no;
    std::string line = raw.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (end == raw.size()) break;
      continue;
    }

    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError(line_no, "malformed event record");
    }

    Event event;
    event.session_id = require<std::string>(obj, "session_id", line_no);
    event.timestamp_ms = require<std::int64_t>(obj, "timestamp_ms", line_no);
    if (event.timestamp_ms < 0) throw SchemaError(line_no, "timestamp_ms must be >= 0");
    const auto kind_name = require<std::string>(obj, "kind", line_no);
    if (!event_kind_from_string(kind_name, event.kind)) {
      throw SchemaError(line_no, "unknown event kind '" + kind_name + "'");
    }
    auto payload_it = obj.find("payload");
    const json empty = json::object();
    event.payload = parse_payload(event.kind, payload_it == obj.end() ? empty : *payload_it,
                                  line_no);
    events.push_back(std::move(event));
    if (end == raw.size()) break;
  }
  return events;
}

std::string serialize_event(const Event& event) {
  json obj;
  obj["session_id"] = event.session_id;
  obj["timestamp_ms"] = event.timestamp_ms;
  obj["kind"] = to_string(event.kind);
  obj["payload"] = payload_to_json(event);
  return obj.dump();
}

std::string serialize_events(const std::vector<Event>& events) {
  std::string out;
  for (const auto& event : events) {
    out += serialize_event(event);
    out += '\n';
  }
  return out;
}

}  // namespace sessionlens

#include <string>
#include <vector>

#include "doctest.h"
#include "sessionlens/csv.hpp"
#include "sessionlens/errors.hpp"
#include "sessionlens/events.hpp"
#include "sessionlens/text.hpp"
#include "test_util.hpp"

using namespace sessionlens;

TEST_SUITE_BEGIN("io");

TEST_CASE("csv line splitting honors quotes") {
  CHECK(csv::split_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(csv::split_line("a,\"b,c\",d") == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(csv::split_line("\"he said \"\"hi\"\"\",x") ==
        std::vector<std::string>{"he said \"hi\"", "x"});
  CHECK(csv::split_line("a,,b") == std::vector<std::string>{"a", "", "b"});
  CHECK(csv::split_line("") == std::vector<std::string>{""});
}

TEST_CASE("csv quoting round-trips through split") {
  const std::vector<std::string> fields = {"plain", "with,comma", "with\"quote", ""};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv::quote_field(fields[i]);
  }
  CHECK(csv::split_line(line) == fields);
}

TEST_CASE("csv table parse finds columns and rejects ragged rows") {
  const csv::Table table = csv::parse("a,b\n1,2\n3,4\n");
  CHECK(table.header == std::vector<std::string>{"a", "b"});
  CHECK(table.rows.size() == 2);
  CHECK(table.column("b") == 1);
  CHECK(table.column("missing") == -1);
  CHECK_THROWS_AS((void)csv::parse("a,b\n1\n"), ParseError);
}

TEST_CASE("format_value round-trips doubles exactly") {
  for (double v : {0.0, 1.0, -1.5, 2.0 / 3.0, 7.0 / 6.0, 0.1, 1e-9, 123456.789,
                   0.30599999999999999}) {
    CHECK(std::stod(csv::format_value(v)) == v);
  }
  CHECK(csv::format_value(200.0) == "200");
  CHECK(csv::format_value(0.75) == "0.75");
}

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Altitude_sickness and ALTITUDE-2") ==
        std::vector<std::string>{"altitude", "sickness", "and", "altitude", "2"});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("https://a.b/c") == std::vector<std::string>{"https", "a", "b", "c"});
}

TEST_CASE("domain extraction") {
  CHECK(domain_of_url("https://wikipedia.org/wiki/X") == "wikipedia.org");
  CHECK(domain_of_url("http://a.example/path?q=1") == "a.example");
  CHECK(domain_of_url("no-scheme/path") == "no-scheme");
}

TEST_CASE("event stream parses the bundled sample") {
  const auto events = parse_event_stream(read_file(fixture_path("s1_events.jsonl")));
  REQUIRE(events.size() == 13);
  CHECK(events.front().kind == EventKind::kQuery);
  CHECK(events.front().session_id == "u1:altitude_sickness");
  CHECK(events.back().kind == EventKind::kPageLeave);
  CHECK(events.back().timestamp_ms == 200000);
}

TEST_CASE("event serialization round-trips") {
  const std::string raw = read_file(fixture_path("s1_events.jsonl"));
  const auto events = parse_event_stream(raw);
  const std::string once = serialize_events(events);
  CHECK(serialize_events(parse_event_stream(once)) == once);
}

TEST_CASE("event parse errors carry line numbers") {
  CHECK_THROWS_WITH_AS((void)parse_event_stream("{not json\n"),
                       doctest::Contains("line 1"), ParseError);
  const std::string missing_kind =
      R"({"session_id":"s","timestamp_ms":0,"payload":{}})" "\n";
  CHECK_THROWS_AS((void)parse_event_stream(missing_kind), SchemaError);
  const std::string bad_rank =
      R"({"session_id":"s","timestamp_ms":0,"kind":"mouseover","payload":{"rank":0}})" "\n";
  CHECK_THROWS_AS((void)parse_event_stream(bad_rank), SchemaError);
  const std::string negative_ts =
      R"({"session_id":"s","timestamp_ms":-5,"kind":"keypress","payload":{}})" "\n";
  CHECK_THROWS_AS((void)parse_event_stream(negative_ts), SchemaError);
}

TEST_CASE("blank lines in event streams are skipped") {
  const std::string raw =
      "\n" R"({"session_id":"s","timestamp_ms":1,"kind":"keypress","payload":{}})" "\n\n";
  CHECK(parse_event_stream(raw).size() == 1);
}

TEST_SUITE_END();

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sessionlens/errors.hpp"
#include "sessionlens/features.hpp"
#include "sessionlens/knowledge.hpp"
#include "sessionlens/session.hpp"
#include "sessionlens/synth.hpp"
#include "sessionlens/text.hpp"
#include "naive_features.hpp"
#include "test_util.hpp"

using namespace sessionlens;

namespace {

std::vector<Session> s1_sessions() {
  AssemblyConfig config;
  config.serp_prefix = "https://serp.example.org/";
  return assemble_sessions(parse_event_stream(read_file(fixture_path("s1_events.jsonl"))),
                           config);
}

}  // namespace

TEST_SUITE_BEGIN("features");

TEST_CASE("canonical feature names are unique and indexable") {
  const auto names = canonical_feature_names();
  REQUIRE(names.size() == kFeatureCount);
  std::set<std::string_view> seen(names.begin(), names.end());
  CHECK(seen.size() == kFeatureCount);
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(feature_index(names[i]) == static_cast<int>(i));
  }
  CHECK(feature_index("no_such_feature") == -1);
  CHECK(feature_index("s_duration") == 0);
  CHECK(feature_index("m_scroll_max_pos_per_q") == 69);
}

TEST_CASE("lexicon parses, looks up, and rejects bad rows") {
  const AoALexicon lex = AoALexicon::parse("word,aoa\nfoo,5.5\nbar,10.25\n");
  CHECK(lex.size() == 2);
  CHECK(lex.lookup("foo") == 5.5);
  CHECK(lex.lookup("missing") == std::nullopt);
  CHECK_THROWS_AS((void)AoALexicon::parse("word,aoa\nfoo,notanumber\n"), DataError);
  const AoALexicon fixture = AoALexicon::load(fixture_path("aoa_sample.csv"));
  CHECK(fixture.lookup("altitude") == 10.1);
}

TEST_CASE("query complexity is the hardest known word") {
  const auto sessions = s1_sessions();
  const AoALexicon lex = AoALexicon::load(fixture_path("aoa_sample.csv"));
  CHECK(query_complexity(sessions[0].queries[0], lex) == 10.1);
  const AoALexicon empty;
  CHECK(query_complexity(sessions[0].queries[0], empty) == 0.0);
}

TEST_CASE("term overlap is the covered fraction of the query") {
  CHECK(term_overlap({"a", "b", "c"}, {"a", "c", "z"}) == doctest::Approx(2.0 / 3.0));
  CHECK(term_overlap({"a"}, {}) == 0.0);
  CHECK_THROWS_AS((void)term_overlap({}, {"x"}), DataError);
}

TEST_CASE("sample session extracts the hand-computed values") {
  const AoALexicon lex = AoALexicon::load(fixture_path("aoa_sample.csv"));
  const FeatureVector v = extract(s1_sessions()[0], lex);
  const auto& expected = s1_expected_features();
  REQUIRE(expected.size() == kFeatureCount);
  for (const auto& [name, want] : expected) {
    CAPTURE(name);
    CHECK(v.at_name(name) == want);
  }
}

TEST_CASE("extract matches the naive re-derivation on generated sessions") {
  GeneratorSpec spec;
  spec.n_sessions = 200;
  spec.seed = 314159;
  spec.effects["m_num"] = EffectSpec{0.5, 0.0};
  const SynthResult synth = generate(spec);
  AssemblyConfig config;
  config.serp_prefix = kSynthSerpPrefix;
  const auto sessions = assemble_sessions(synth.events, config);
  REQUIRE(sessions.size() == 200);
  const AoALexicon lex = AoALexicon::load(fixture_path("aoa_sample.csv"));
  for (const auto& session : sessions) {
    const FeatureVector got = extract(session, lex);
    const auto want = naive_extract(session, lex);
    for (const auto& [name, value] : want) {
      CAPTURE(session.session_id);
      CAPTURE(name);
      REQUIRE(got.at_name(name) == value);
    }
  }
}

TEST_CASE("naive agreement holds with a planted long-dwell page") {
  GeneratorSpec spec;
  spec.n_sessions = 40;
  spec.seed = 11;
  spec.effects["b_time_max_per_page"] = EffectSpec{1.0, 0.0};
  const SynthResult synth = generate(spec);
  AssemblyConfig config;
  config.serp_prefix = kSynthSerpPrefix;
  const AoALexicon lex;
  for (const auto& session : assemble_sessions(synth.events, config)) {
    const FeatureVector got = extract(session, lex);
    for (const auto& [name, value] : naive_extract(session, lex)) {
      CAPTURE(session.session_id);
      CAPTURE(name);
      REQUIRE(got.at_name(name) == value);
    }
  }
}

TEST_CASE("extract requires at least one query") {
  Session s;
  s.session_id = "empty";
  CHECK_THROWS_AS((void)extract(s, AoALexicon{}), DataError);
}

TEST_CASE("matrix rows are ordered by topic then user") {
  GeneratorSpec spec;
  spec.n_sessions = 12;
  spec.n_topics = 3;
  spec.seed = 5;
  const SynthResult synth = generate(spec);
  AssemblyConfig config;
  config.serp_prefix = kSynthSerpPrefix;
  const auto sessions = assemble_sessions(synth.events, config);
  const FeatureMatrix matrix = extract_matrix(sessions, AoALexicon{});
  REQUIRE(matrix.n_rows() == 12);
  auto keys = matrix.row_keys;
  auto sorted = keys;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.second, a.first) < std::tie(b.second, b.first);
            });
  CHECK(keys == sorted);
}

TEST_CASE("matrix CSV round-trips exactly") {
  GeneratorSpec spec;
  spec.n_sessions = 25;
  spec.seed = 77;
  const SynthResult synth = generate(spec);
  AssemblyConfig config;
  config.serp_prefix = kSynthSerpPrefix;
  const FeatureMatrix matrix =
      extract_matrix(assemble_sessions(synth.events, config), AoALexicon{});
  const FeatureMatrix back = parse_matrix_csv(matrix_to_csv(matrix));
  REQUIRE(back.n_rows() == matrix.n_rows());
  CHECK(back.names == matrix.names);
  CHECK(back.row_keys == matrix.row_keys);
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      REQUIRE(back.rows[r][c] == matrix.rows[r][c]);
    }
  }
}

TEST_CASE("matrix CSV parsing validates the header") {
  CHECK_THROWS_AS((void)parse_matrix_csv("wrong,header\n1,2\n"), DataError);
  CHECK_THROWS_AS((void)load_matrix_csv("/definitely/not/here.csv"), DataError);
}

TEST_SUITE_END();

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sessionlens/errors.hpp"
#include "sessionlens/knowledge.hpp"
#include "sessionlens/rng.hpp"
#include "test_util.hpp"

using namespace sessionlens;

namespace {

std::vector<KeyItem> key4() {
  return {{"i1", true}, {"i2", false}, {"i3", true}, {"i4", false}};
}

KnowledgeRecord record_with_gain(const std::string& user, const std::string& topic,
                                 double pre, double post) {
  KnowledgeRecord r;
  r.user_id = user;
  r.topic_id = topic;
  r.pre_score = pre;
  r.post_score = post;
  r.gain = post - pre;
  // Minimal answers so serialization round-trips stay valid.
  r.answer_key = key4();
  r.pre_answers = {{"i1", Answer::kIdk}};
  r.post_answers = {{"i1", Answer::kTrue}};
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("knowledge");

TEST_CASE("score_test counts correct answers only") {
  const auto key = key4();
  CHECK(score_test({{"i1", Answer::kTrue}, {"i2", Answer::kFalse}}, key) == 0.5);
  // IDK and wrong answers score the same; unanswered items count as wrong.
  CHECK(score_test({{"i1", Answer::kIdk}, {"i2", Answer::kTrue}}, key) == 0.0);
  CHECK(score_test({}, key) == 0.0);
  CHECK(score_test({{"i1", Answer::kTrue},
                    {"i2", Answer::kFalse},
                    {"i3", Answer::kTrue},
                    {"i4", Answer::kFalse}},
                   key) == 1.0);
}

TEST_CASE("score_test rejects bad inputs") {
  CHECK_THROWS_AS((void)score_test({}, {}), DataError);
  CHECK_THROWS_AS((void)score_test({{"nope", Answer::kTrue}}, key4()), DataError);
}

TEST_CASE("knowledge_gain is the post minus pre difference") {
  CHECK(knowledge_gain(0.4, 0.6) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(knowledge_gain(1.0, 0.0) == -1.0);
  CHECK_THROWS_AS((void)knowledge_gain(-0.1, 0.5), DataError);
  CHECK_THROWS_AS((void)knowledge_gain(0.1, 1.5), DataError);
}

TEST_CASE("standardize centers and scales with the sample sd") {
  const std::vector<double> values = {1.0, 2.0, 3.0, 4.0, 5.0};
  const auto z = standardize(values);
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(z.size() - 1));
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(sd - 1.0) < 1e-9);
  CHECK_THROWS_AS((void)standardize({1.0}), DegenerateDistributionError);
  CHECK_THROWS_AS((void)standardize({2.0, 2.0, 2.0}), DegenerateDistributionError);
}

TEST_CASE("bin_class boundaries fall into the middle band") {
  CHECK(bin_class(-0.5) == KnowledgeClass::kModerate);
  CHECK(bin_class(0.5) == KnowledgeClass::kModerate);
  CHECK(bin_class(-0.5000001) == KnowledgeClass::kLow);
  CHECK(bin_class(0.5000001) == KnowledgeClass::kHigh);
  CHECK(bin_class(0.0) == KnowledgeClass::kModerate);
}

TEST_CASE("published gain moments bin the documented examples") {
  const double mean = 0.193, sd = 0.231;
  CHECK(bin_class((0.40 - mean) / sd) == KnowledgeClass::kHigh);
  CHECK(bin_class((0.10 - mean) / sd) == KnowledgeClass::kModerate);
  CHECK(bin_class((-0.05 - mean) / sd) == KnowledgeClass::kLow);
}

TEST_CASE("label_dataset standardizes within each topic by default") {
  std::vector<KnowledgeRecord> records;
  // Topic A gains: 0.0, 0.2, 0.4; topic B gains shifted up by 0.4.
  records.push_back(record_with_gain("u1", "a", 0.2, 0.2));
  records.push_back(record_with_gain("u2", "a", 0.2, 0.4));
  records.push_back(record_with_gain("u3", "a", 0.2, 0.6));
  records.push_back(record_with_gain("u4", "b", 0.2, 0.6));
  records.push_back(record_with_gain("u5", "b", 0.2, 0.8));
  records.push_back(record_with_gain("u6", "b", 0.0, 1.0));
  label_dataset(records);
  // Same within-topic shape => same labels in both topics.
  CHECK(records[0].gain_class == KnowledgeClass::kLow);
  CHECK(records[1].gain_class == KnowledgeClass::kModerate);
  CHECK(records[2].gain_class == KnowledgeClass::kHigh);
  CHECK(records[3].gain_class == KnowledgeClass::kLow);
  CHECK(records[4].gain_class == KnowledgeClass::kModerate);
  CHECK(records[5].gain_class == KnowledgeClass::kHigh);
  CHECK(records[0].state_class.has_value());

  label_dataset(records, Grouping::kGlobal);
  // Globally, topic B's 1.0 gain sits far above the pooled mean.
  CHECK(records[5].gain_class == KnowledgeClass::kHigh);
  CHECK(records[0].gain_class == KnowledgeClass::kLow);
}

TEST_CASE("label_dataset reports which cell degenerated") {
  std::vector<KnowledgeRecord> records;
  records.push_back(record_with_gain("u1", "solo", 0.1, 0.3));
  CHECK_THROWS_WITH_AS(label_dataset(records), doctest::Contains("solo"),
                       DegenerateDistributionError);
}

TEST_CASE("z-bin proportions approach the normal band masses") {
  // P(z < -0.5) = P(z > 0.5) ~ 0.3085, middle band ~ 0.3829.
  Rng rng(2024);
  const int n = 10000;
  std::vector<double> draws(n);
  for (auto& d : draws) d = rng.normal();
  const auto z = standardize(draws);
  int low = 0, mid = 0, high = 0;
  for (double v : z) {
    switch (bin_class(v)) {
      case KnowledgeClass::kLow: ++low; break;
      case KnowledgeClass::kModerate: ++mid; break;
      case KnowledgeClass::kHigh: ++high; break;
    }
  }
  CHECK(std::abs(low / double(n) - 0.3085) < 0.03);
  CHECK(std::abs(mid / double(n) - 0.3829) < 0.03);
  CHECK(std::abs(high / double(n) - 0.3085) < 0.03);
}

TEST_CASE("cronbach_alpha hand examples") {
  // Items uncorrelated with each other: alpha 0.
  CHECK(cronbach_alpha({{0, 0}, {1, 1}, {0, 1}, {1, 0}}) == doctest::Approx(0.0));
  // Perfectly parallel items: alpha 1.
  CHECK(cronbach_alpha({{0, 0}, {1, 1}, {0, 0}, {1, 1}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)cronbach_alpha({{0, 1}}), DegenerateDistributionError);
  CHECK_THROWS_AS((void)cronbach_alpha({{0}, {1}}), DegenerateDistributionError);
  CHECK_THROWS_AS((void)cronbach_alpha({{0, 1}, {0}}), DataError);
}

TEST_CASE("cronbach_alpha near zero for independent items") {
  Rng rng(99);
  std::vector<std::vector<int>> matrix(1000, std::vector<int>(10));
  for (auto& row : matrix) {
    for (auto& cell : row) cell = rng.below(2) ? 1 : 0;
  }
  CHECK(std::abs(cronbach_alpha(matrix)) < 0.3);
}

TEST_CASE("describe_topics orders topics by mean gain") {
  std::vector<KnowledgeRecord> records;
  records.push_back(record_with_gain("u1", "hot", 0.1, 0.7));
  records.push_back(record_with_gain("u2", "hot", 0.1, 0.9));
  records.push_back(record_with_gain("u3", "cold", 0.5, 0.6));
  records.push_back(record_with_gain("u4", "cold", 0.5, 0.5));
  records.push_back(record_with_gain("u5", "mid", 0.2, 0.5));
  records.push_back(record_with_gain("u6", "mid", 0.4, 0.7));
  const TopicSummary summary = describe_topics(records);
  REQUIRE(summary.topics.size() == 3);
  CHECK(summary.topics[0].topic_id == "cold");
  CHECK(summary.topics[1].topic_id == "mid");
  CHECK(summary.topics[2].topic_id == "hot");
  CHECK(summary.overall.n == 6);
  CHECK(summary.overall.gain_mean == doctest::Approx((0.6 + 0.8 + 0.1 + 0.0 + 0.3 + 0.3) / 6));
  // Topics with higher prior knowledge gained less here.
  REQUIRE(summary.familiarity_correlation.has_value());
  CHECK(*summary.familiarity_correlation < 0.0);
  const std::string text = format_topic_summary(summary);
  CHECK(text.find("familiarity_correlation") != std::string::npos);
  CHECK(text.find("cold") < text.find("hot"));
}

TEST_CASE("records JSON round-trips") {
  const auto records = parse_records(read_file(fixture_path("s1_records.json")));
  REQUIRE(records.size() == 1);
  auto scored = records;
  score_records(scored);
  CHECK(scored[0].pre_score == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(scored[0].post_score == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(scored[0].gain == doctest::Approx(0.2).epsilon(1e-12));

  const auto reparsed = parse_records(records_to_json(records));
  REQUIRE(reparsed.size() == 1);
  CHECK(reparsed[0].user_id == records[0].user_id);
  CHECK(reparsed[0].answer_key.size() == records[0].answer_key.size());
  CHECK(reparsed[0].pre_answers.size() == records[0].pre_answers.size());
  CHECK(records_to_json(reparsed) == records_to_json(records));
}

TEST_CASE("labels CSV round-trips scores and classes") {
  std::vector<KnowledgeRecord> records;
  records.push_back(record_with_gain("u1", "a", 0.25, 0.75));
  records.push_back(record_with_gain("u2", "a", 0.4, 0.4));
  records.push_back(record_with_gain("u3", "a", 0.6, 0.7));
  label_dataset(records);
  const auto parsed = parse_labels_csv(labels_to_csv(records));
  REQUIRE(parsed.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(parsed[i].user_id == records[i].user_id);
    CHECK(parsed[i].pre_score == records[i].pre_score);
    CHECK(parsed[i].post_score == records[i].post_score);
    CHECK(parsed[i].gain == records[i].gain);
    CHECK(parsed[i].gain_class == records[i].gain_class);
    CHECK(parsed[i].state_class == records[i].state_class);
  }
}

TEST_CASE("malformed records report useful errors") {
  CHECK_THROWS_AS((void)parse_records("not json"), DataError);
  CHECK_THROWS_AS((void)parse_records(R"({"users": [{"user_id": "u"}]})"), DataError);
}

TEST_SUITE_END();

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sessionlens {

enum class Answer { kTrue, kFalse, kIdk };

enum class KnowledgeClass { kLow, kModerate, kHigh };

const char* to_string(Answer a);
const char* to_string(KnowledgeClass c);
bool answer_from_string(const std::string& s, Answer& out);
bool knowledge_class_from_string(const std::string& s, KnowledgeClass& out);

struct ItemAnswer {
  std::string item_id;
  Answer answer = Answer::kIdk;
};

struct KeyItem {
  std::string item_id;
  bool truth = false;  // true <-> "TRUE"
};

// Per-user pre/post test answers with derived scores, gain, and class labels.
struct KnowledgeRecord {
  std::string user_id;
  std::string topic_id;
  std::vector<ItemAnswer> pre_answers;
  std::vector<ItemAnswer> post_answers;
  std::vector<KeyItem> answer_key;

  double pre_score = 0.0;   // k(t_i), fraction correct in [0,1]
  double post_score = 0.0;  // k(t_j)
  double gain = 0.0;        // post_score - pre_score

  std::optional<KnowledgeClass> gain_class;
  std::optional<KnowledgeClass> state_class;
};

enum class Grouping { kPerTopic, kGlobal };

// Fraction of key items answered correctly. IDK and unanswered items count
// as incorrect. Throws DataError on an empty key or an answer whose item_id
// is not in the key.
double score_test(const std::vector<ItemAnswer>& answers, const std::vector<KeyItem>& key);

double knowledge_gain(double pre_score, double post_score);

// Fills pre_score/post_score/gain from the answers and key.
void score_record(KnowledgeRecord& record);
void score_records(std::vector<KnowledgeRecord>& records);

// Z-scores with the sample (n-1) standard deviation. Throws
// DegenerateDistributionError when n < 2 or the SD is zero.
std::vector<double> standardize(const std::vector<double>& values);

// Standard-deviation classification: Low below -0.5, High above +0.5,
// Moderate in between. Boundary values land in Moderate.
KnowledgeClass bin_class(double z);

// Sets state_class from z-standardized post scores and gain_class from
// z-standardized gains, standardizing within each grouping cell.
void label_dataset(std::vector<KnowledgeRecord>& records, Grouping grouping = Grouping::kPerTopic);

// Cronbach's alpha over a users x items matrix of 0/1 item scores,
// with sample variances.
double cronbach_alpha(const std::vector<std::vector<int>>& item_matrix);

struct TopicStats {
  std::string topic_id;
  std::size_t n = 0;
  double pre_mean = 0.0, pre_sd = 0.0;
  double post_mean = 0.0, post_sd = 0.0;
  double gain_mean = 0.0, gain_sd = 0.0;
};

struct TopicSummary {
  std::vector<TopicStats> topics;  // ordered by ascending mean gain
  TopicStats overall;
  // Pearson r between per-topic mean pre-score and mean gain; unset when
  // there are fewer than 2 topics or the correlation is undefined.
  std::optional<double> familiarity_correlation;
};

TopicSummary describe_topics(const std::vector<KnowledgeRecord>& records);

// Renders the summary as an aligned text table (fractions, not percent).
std::string format_topic_summary(const TopicSummary& summary);

// JSON file {"answer_keys": {topic: [{item_id, truth}]}, "users": [...]}.
std::vector<KnowledgeRecord> load_records(const std::string& path);
std::vector<KnowledgeRecord> parse_records(const std::string& json_text);
std::string records_to_json(const std::vector<KnowledgeRecord>& records);

// CSV echo of labels: user_id, topic_id, pre, post, gain, state_class, gain_class.
std::string labels_to_csv(const std::vector<KnowledgeRecord>& records);
std::vector<KnowledgeRecord> parse_labels_csv(const std::string& text);

}  // namespace sessionlens

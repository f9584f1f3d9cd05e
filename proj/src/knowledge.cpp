#include "sessionlens/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sessionlens/csv.hpp"
#include "sessionlens/errors.hpp"

namespace sessionlens {

using nlohmann::json;

const char* to_string(Answer a) {
  switch (a) {
    case Answer::kTrue: return "TRUE";
    case Answer::kFalse: return "FALSE";
    case Answer::kIdk: return "IDK";
  }
  return "IDK";
}

const char* to_string(KnowledgeClass c) {
  switch (c) {
    case KnowledgeClass::kLow: return "Low";
    case KnowledgeClass::kModerate: return "Moderate";
    case KnowledgeClass::kHigh: return "High";
  }
  return "Moderate";
}

bool answer_from_string(const std::string& s, Answer& out) {
  if (s == "TRUE") out = Answer::kTrue;
  else if (s == "FALSE") out = Answer::kFalse;
  else if (s == "IDK") out = Answer::kIdk;
  else return false;
  return true;
}

bool knowledge_class_from_string(const std::string& s, KnowledgeClass& out) {
  if (s == "Low") out = KnowledgeClass::kLow;
  else if (s == "Moderate") out = KnowledgeClass::kModerate;
  else if (s == "High") out = KnowledgeClass::kHigh;
  else return false;
  return true;
}

double score_test(const std::vector<ItemAnswer>& answers, const std::vector<KeyItem>& key) {
  if (key.empty()) throw DataError("score_test: empty answer key");
  std::map<std::string, bool> truth;
  for (const auto& item : key) truth[item.item_id] = item.truth;

  // Later duplicates of the same item override earlier ones.
  std::map<std::string, Answer> answered;
  for (const auto& a : answers) {
    if (truth.find(a.item_id) == truth.end()) {
      throw DataError("score_test: answer references unknown item '" + a.item_id + "'");
    }
    answered[a.item_id] = a.answer;
  }

  std::size_t correct = 0;
  for (const auto& [item_id, t] : truth) {
    auto it = answered.find(item_id);
    if (it == answered.end()) continue;  // unanswered counts as incorrect
    if (it->second == Answer::kIdk) continue;
    const bool said_true = it->second == Answer::kTrue;
    if (said_true == t) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(key.size());
}

double knowledge_gain(double pre_score, double post_score) {
  if (pre_score < 0.0 || pre_score > 1.0 || post_score < 0.0 || post_score > 1.0) {
    throw DataError("knowledge_gain: scores must lie in [0,1]");
  }
  return post_score - pre_score;
}

void score_record(KnowledgeRecord& record) {
  record.pre_score = score_test(record.pre_answers, record.answer_key);
  record.post_score = score_test(record.post_answers, record.answer_key);
  record.gain = knowledge_gain(record.pre_score, record.post_score);
}

void score_records(std::vector<KnowledgeRecord>& records) {
  for (auto& record : records) score_record(record);
}

namespace {

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

// Sample SD; 0 for fewer than two values.
double sample_sd(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

std::vector<double> standardize(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw DegenerateDistributionError("standardize: need at least 2 values");
  }
  // min == max catches constant inputs even when rounding leaves the
  // computed deviations a few ulp away from zero.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    throw DegenerateDistributionError("standardize: zero variance");
  }
  const double mean = mean_of(values);
  const double sd = sample_sd(values, mean);
  if (sd <= 0.0) {
    throw DegenerateDistributionError("standardize: zero variance");
  }
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sd;
  return z;
}

KnowledgeClass bin_class(double z) {
  if (!(std::isfinite(z))) throw DataError("bin_class: non-finite z-score");
  if (z < -0.5) return KnowledgeClass::kLow;
  if (z > 0.5) return KnowledgeClass::kHigh;
  return KnowledgeClass::kModerate;
}

void label_dataset(std::vector<KnowledgeRecord>& records, Grouping grouping) {
  std::map<std::string, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string key = grouping == Grouping::kPerTopic ? records[i].topic_id : "";
    cells[key].push_back(i);
  }
  for (const auto& [cell, indices] : cells) {
    std::vector<double> posts, gains;
    posts.reserve(indices.size());
    gains.reserve(indices.size());
    for (std::size_t i : indices) {
      posts.push_back(records[i].post_score);
      gains.push_back(records[i].gain);
    }
    const std::string where = cell.empty() ? "global" : "topic '" + cell + "'";
    std::vector<double> z_post, z_gain;
    try {
      z_post = standardize(posts);
      z_gain = standardize(gains);
    } catch (const DegenerateDistributionError& e) {
      throw DegenerateDistributionError("label_dataset: " + where + ": " + e.what());
    }
    for (std::size_t j = 0; j < indices.size(); ++j) {
      records[indices[j]].state_class = bin_class(z_post[j]);
      records[indices[j]].gain_class = bin_class(z_gain[j]);
    }
  }
}

double cronbach_alpha(const std::vector<std::vector<int>>& item_matrix) {
  const std::size_t n_users = item_matrix.size();
  if (n_users < 2) throw DegenerateDistributionError("cronbach_alpha: need >= 2 users");
  const std::size_t n_items = item_matrix.front().size();
  if (n_items < 2) throw DegenerateDistributionError("cronbach_alpha: need >= 2 items");
  for (const auto& row : item_matrix) {
    if (row.size() != n_items) throw DataError("cronbach_alpha: ragged item matrix");
  }

  std::vector<double> totals(n_users, 0.0);
  double item_var_sum = 0.0;
  for (std::size_t j = 0; j < n_items; ++j) {
    std::vector<double> col(n_users);
    for (std::size_t i = 0; i < n_users; ++i) {
      col[i] = static_cast<double>(item_matrix[i][j]);
      totals[i] += col[i];
    }
    const double m = mean_of(col);
    const double sd = sample_sd(col, m);
    item_var_sum += sd * sd;
  }
  const double total_mean = mean_of(totals);
  const double total_sd = sample_sd(totals, total_mean);
  const double total_var = total_sd * total_sd;
  if (total_var <= 0.0) {
    throw DegenerateDistributionError("cronbach_alpha: zero total-score variance");
  }
  const double k = static_cast<double>(n_items);
  return k / (k - 1.0) * (1.0 - item_var_sum / total_var);
}

TopicSummary describe_topics(const std::vector<KnowledgeRecord>& records) {
  if (records.empty()) throw DataError("describe_topics: no records");
  std::map<std::string, std::vector<const KnowledgeRecord*>> by_topic;
  for (const auto& r : records) by_topic[r.topic_id].push_back(&r);

  auto stats_of = [](const std::string& topic,
                     const std::vector<const KnowledgeRecord*>& rs) {
    TopicStats s;
    s.topic_id = topic;
    s.n = rs.size();
    std::vector<double> pre, post, gain;
    for (const auto* r : rs) {
      pre.push_back(r->pre_score);
      post.push_back(r->post_score);
      gain.push_back(r->gain);
    }
    s.pre_mean = mean_of(pre);
    s.pre_sd = sample_sd(pre, s.pre_mean);
    s.post_mean = mean_of(post);
    s.post_sd = sample_sd(post, s.post_mean);
    s.gain_mean = mean_of(gain);
    s.gain_sd = sample_sd(gain, s.gain_mean);
    return s;
  };

  TopicSummary out;
  for (const auto& [topic, rs] : by_topic) out.topics.push_back(stats_of(topic, rs));
  std::stable_sort(out.topics.begin(), out.topics.end(),
                   [](const TopicStats& a, const TopicStats& b) {
                     return a.gain_mean < b.gain_mean;
                   });

  std::vector<const KnowledgeRecord*> all;
  for (const auto& r : records) all.push_back(&r);
  out.overall = stats_of("Overall", all);

  if (out.topics.size() >= 2) {
    std::vector<double> pre_means, gain_means;
    for (const auto& t : out.topics) {
      pre_means.push_back(t.pre_mean);
      gain_means.push_back(t.gain_mean);
    }
    const double mx = mean_of(pre_means);
    const double my = mean_of(gain_means);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < pre_means.size(); ++i) {
      sxy += (pre_means[i] - mx) * (gain_means[i] - my);
      sxx += (pre_means[i] - mx) * (pre_means[i] - mx);
      syy += (gain_means[i] - my) * (gain_means[i] - my);
    }
    if (sxx > 0.0 && syy > 0.0) {
      out.familiarity_correlation = sxy / std::sqrt(sxx * syy);
    }
  }
  return out;
}

std::string format_topic_summary(const TopicSummary& summary) {
  std::ostringstream os;
  os << "topic,n,pre_mean,pre_sd,post_mean,post_sd,gain_mean,gain_sd\n";
  auto row = [&os](const TopicStats& s) {
    os << csv::quote_field(s.topic_id) << ',' << s.n << ',' << csv::format_value(s.pre_mean)
       << ',' << csv::format_value(s.pre_sd) << ',' << csv::format_value(s.post_mean) << ','
       << csv::format_value(s.post_sd) << ',' << csv::format_value(s.gain_mean) << ','
       << csv::format_value(s.gain_sd) << '\n';
  };
  for (const auto& t : summary.topics) row(t);
  row(summary.overall);
  if (summary.familiarity_correlation) {
    os << "familiarity_correlation,"
       << csv::format_value(*summary.familiarity_correlation) << "\n";
  }
  return os.str();
}

namespace {

ItemAnswer item_answer_from_json(const json& obj) {
  ItemAnswer a;
  a.item_id = obj.at("item_id").get<std::string>();
  const auto s = obj.at("answer").get<std::string>();
  if (!answer_from_string(s, a.answer)) {
    throw DataError("unknown answer value '" + s + "'");
  }
  return a;
}

}  // namespace

std::vector<KnowledgeRecord> parse_records(const std::string& json_text) try {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw DataError("knowledge records: malformed JSON document");
  }
  std::map<std::string, std::vector<KeyItem>> keys;
  if (auto it = doc.find("answer_keys"); it != doc.end()) {
    for (const auto& [topic, arr] : it->items()) {
      std::vector<KeyItem> key;
      for (const auto& obj : arr) {
        KeyItem item;
        item.item_id = obj.at("item_id").get<std::string>();
        const auto t = obj.at("truth").get<std::string>();
        if (t == "TRUE") item.truth = true;
        else if (t == "FALSE") item.truth = false;
        else throw DataError("answer key truth must be TRUE or FALSE, got '" + t + "'");
        key.push_back(std::move(item));
      }
      keys[topic] = std::move(key);
    }
  }

  std::vector<KnowledgeRecord> records;
  auto users = doc.find("users");
  if (users == doc.end() || !users->is_array()) {
    throw DataError("knowledge records: missing 'users' array");
  }
  for (const auto& u : *users) {
    KnowledgeRecord r;
    r.user_id = u.at("user_id").get<std::string>();
    r.topic_id = u.at("topic_id").get<std::string>();
    if (auto it = keys.find(r.topic_id); it != keys.end()) {
      r.answer_key = it->second;
    } else {
      throw DataError("no answer key for topic '" + r.topic_id + "'");
    }
    for (const auto& a : u.value("pre_answers", json::array())) {
      r.pre_answers.push_back(item_answer_from_json(a));
    }
    for (const auto& a : u.value("post_answers", json::array())) {
      r.post_answers.push_back(item_answer_from_json(a));
    }
    records.push_back(std::move(r));
  }
  return records;
} catch (const json::exception& e) {
  throw DataError(std::string("knowledge records: ") + e.what());
}

std::vector<KnowledgeRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_records(buf.str());
}

std::string records_to_json(const std::vector<KnowledgeRecord>& records) {
  json keys = json::object();
  json users = json::array();
  for (const auto& r : records) {
    if (keys.find(r.topic_id) == keys.end()) {
      json arr = json::array();
      for (const auto& item : r.answer_key) {
        arr.push_back({{"item_id", item.item_id}, {"truth", item.truth ? "TRUE" : "FALSE"}});
      }
      keys[r.topic_id] = std::move(arr);
    }
    json u;
    u["user_id"] = r.user_id;
    u["topic_id"] = r.topic_id;
    auto answers = [](const std::vector<ItemAnswer>& as) {
      json arr = json::array();
      for (const auto& a : as) {
        arr.push_back({{"item_id", a.item_id}, {"answer", to_string(a.answer)}});
      }
      return arr;
    };
    u["pre_answers"] = answers(r.pre_answers);
    u["post_answers"] = answers(r.post_answers);
    users.push_back(std::move(u));
  }
  json doc;
  doc["answer_keys"] = std::move(keys);
  doc["users"] = std::move(users);
  return doc.dump(2) + "\n";
}

std::string labels_to_csv(const std::vector<KnowledgeRecord>& records) {
  std::ostringstream os;
  os << "user_id,topic_id,pre,post,gain,state_class,gain_class\n";
  for (const auto& r : records) {
    os << csv::quote_field(r.user_id) << ',' << csv::quote_field(r.topic_id) << ','
       << csv::format_value(r.pre_score) << ',' << csv::format_value(r.post_score) << ','
       << csv::format_value(r.gain) << ','
       << (r.state_class ? to_string(*r.state_class) : "") << ','
       << (r.gain_class ? to_string(*r.gain_class) : "") << '\n';
  }
  return os.str();
}

std::vector<KnowledgeRecord> parse_labels_csv(const std::string& text) {
  const csv::Table table = csv::parse(text);
  const int c_user = table.column("user_id");
  const int c_topic = table.column("topic_id");
  const int c_pre = table.column("pre");
  const int c_post = table.column("post");
  const int c_gain = table.column("gain");
  const int c_state = table.column("state_class");
  const int c_gclass = table.column("gain_class");
  if (c_user < 0 || c_topic < 0 || c_pre < 0 || c_post < 0 || c_gain < 0 ||
      c_state < 0 || c_gclass < 0) {
    throw DataError("labels CSV: missing required columns");
  }
  std::vector<KnowledgeRecord> out;
  for (const auto& row : table.rows) {
    KnowledgeRecord r;
    r.user_id = row[c_user];
    r.topic_id = row[c_topic];
    r.pre_score = std::stod(row[c_pre]);
    r.post_score = std::stod(row[c_post]);
    r.gain = std::stod(row[c_gain]);
    KnowledgeClass c;
    if (!row[c_state].empty()) {
      if (!knowledge_class_from_string(row[c_state], c)) {
        throw DataError("labels CSV: bad state_class '" + row[c_state] + "'");
      }
      r.state_class = c;
    }
    if (!row[c_gclass].empty()) {
      if (!knowledge_class_from_string(row[c_gclass], c)) {
        throw DataError("labels CSV: bad gain_class '" + row[c_gclass] + "'");
      }
      r.gain_class = c;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sessionlens

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sessionlens/knowledge.hpp"

namespace sessionlens {

// Class encoding used everywhere: Low = 0, Moderate = 1, High = 2.
inline constexpr int kNumClasses = 3;

enum class ModelKind { kNB, kLR, kSVM, kRF, kMP, kKsZhang };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct Dataset {
  std::vector<std::vector<double>> x;  // n rows, equal width
  std::vector<int> y;                  // 0 | 1 | 2
  std::vector<std::pair<std::string, std::string>> row_keys;  // optional

  std::size_t n() const { return x.size(); }
  std::size_t width() const { return x.empty() ? 0 : x.front().size(); }
  // Shape/label/finiteness checks; throws DataError.
  void validate() const;
};

// Classifier kind + hyperparameters + seed. Unknown hyperparameter names are
// rejected by make(); values start from default_hyperparameters(kind).
struct ModelSpec {
  ModelKind kind = ModelKind::kNB;
  std::map<std::string, double> hyper;
  std::uint64_t seed = 0;

  static ModelSpec make(ModelKind kind, const std::map<std::string, double>& overrides = {},
                        std::uint64_t seed = 0);
  double get(const std::string& name) const;
};

const std::map<std::string, double>& default_hyperparameters(ModelKind kind);

// Small deterministic tuning grid per kind, in canonical cell order.
std::vector<std::map<std::string, double>> default_grid(ModelKind kind);

struct DecisionTree {
  // nodes[0] is the root. Internal nodes route x[feature] <= threshold to
  // left; leaves have feature == -1 and carry leaf_class.
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_class = -1;
  };
  std::vector<Node> nodes;

  int predict(std::span<const double> x) const;
};

struct MpParams {
  std::vector<std::vector<double>> w1;  // h x (d+1), last column is the bias
  std::vector<std::vector<double>> w2;  // 3 x (h+1)
};

// Mean cross-entropy of the one-hidden-layer (logistic) softmax network, and
// its analytic gradient. Public so tests can compare the gradient against
// central finite differences.
double mp_loss(const MpParams& params, const std::vector<std::vector<double>>& rows,
               const std::vector<int>& labels);
MpParams mp_gradient(const MpParams& params, const std::vector<std::vector<double>>& rows,
                     const std::vector<int>& labels);

// Fitted classifier. Only the fields of the spec's kind are meaningful.
// Prediction ties always break toward the smaller class index, and classes
// absent from training are never predicted.
struct TrainedModel {
  ModelSpec spec;
  int n_features = 0;

  // Standardization statistics from training rows (LR / SVM / MP only).
  std::vector<double> feat_mean, feat_sd;

  std::array<int, kNumClasses> class_count{};

  // NB: Gaussian per class x feature, add-one class priors.
  std::array<double, kNumClasses> log_prior{};
  std::vector<std::array<double, kNumClasses>> nb_mean, nb_var;  // [feature][class]

  // LR: multinomial softmax weights, 3 x (d+1) with trailing bias.
  std::vector<std::vector<double>> lr_w;
  std::vector<double> lr_loss_trace;  // training loss per iteration
  double lr_final_grad_norm = 0.0;

  // SVM: one-vs-rest linear machines.
  std::vector<std::vector<double>> svm_w;  // 3 x d
  std::array<double, kNumClasses> svm_b{};

  // RF
  std::vector<DecisionTree> trees;
  std::vector<std::vector<std::size_t>> oob;  // training-row indices per tree

  // MP
  MpParams mp;
  std::vector<double> mp_loss_trace;  // full-data loss per epoch

  // KS_Zhang: score standardization from training rows + bound columns.
  double ks_mean = 0.0, ks_sd = 1.0;
  int ks_qlen_col = -1, ks_rel_col = -1;

  int predict(std::span<const double> x) const;
  std::vector<int> predict_batch(const std::vector<std::vector<double>>& rows) const;

  // Versioned document; round-trips predictions bit for bit.
  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);
};

TrainedModel fit(const ModelSpec& spec, const Dataset& train);

// Fixed-coefficient session score: -1.466 + 0.039*saved + 0.147*q_len +
// 0.130*rel_mean.
double ks_zhang_score(double saved, double q_len, double rel_mean);

// Standardizes the score list (sample SD) and bins each z-score. Throws
// DegenerateDistributionError on constant scores.
std::vector<KnowledgeClass> ks_zhang_classify(const std::vector<double>& scores);

}  // namespace sessionlens

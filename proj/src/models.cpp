#include "sessionlens/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "sessionlens/errors.hpp"
#include "sessionlens/features.hpp"
#include "sessionlens/rng.hpp"

namespace sessionlens {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// argmax with ties toward the smaller index.
int argmax3(const std::array<double, kNumClasses>& scores,
            const std::array<bool, kNumClasses>& eligible) {
  int best = -1;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!eligible[c]) continue;
    if (best < 0 || scores[c] > scores[best]) best = c;
  }
  return best < 0 ? 0 : best;
}

std::array<double, kNumClasses> softmax3(const std::array<double, kNumClasses>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumClasses> p{};
  double z = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(logits[c] - top);
    z += p[c];
  }
  for (int c = 0; c < kNumClasses; ++c) p[c] /= z;
  return p;
}

std::vector<double> standardize_row(std::span<const double> x,
                                    const std::vector<double>& mean,
                                    const std::vector<double>& sd) {
  std::vector<double> z(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) z[f] = (x[f] - mean[f]) / sd[f];
  return z;
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kNB: return "NB";
    case ModelKind::kLR: return "LR";
    case ModelKind::kSVM: return "SVM";
    case ModelKind::kRF: return "RF";
    case ModelKind::kMP: return "MP";
    case ModelKind::kKsZhang: return "KS_Zhang";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "NB") return ModelKind::kNB;
  if (text == "LR") return ModelKind::kLR;
  if (text == "SVM") return ModelKind::kSVM;
  if (text == "RF") return ModelKind::kRF;
  if (text == "MP") return ModelKind::kMP;
  if (text == "KS_Zhang") return ModelKind::kKsZhang;
  throw DataError("unknown model kind '" + std::string(text) +
                  "' (want NB|LR|SVM|RF|MP|KS_Zhang)");
}

void Dataset::validate() const {
  if (x.empty()) throw DataError("dataset is empty");
  if (y.size() != x.size()) throw DataError("dataset: |y| != rows");
  const std::size_t d = x.front().size();
  for (const auto& row : x) {
    if (row.size() != d) throw DataError("dataset: ragged feature rows");
    for (double v : row) {
      if (!std::isfinite(v)) throw DataError("dataset: non-finite feature value");
    }
  }
  for (int label : y) {
    if (label < 0 || label >= kNumClasses) throw DataError("dataset: label out of range");
  }
}

const std::map<std::string, double>& default_hyperparameters(ModelKind kind) {
  static const std::map<std::string, double> nb{{"var_floor", 1e-9}};
  static const std::map<std::string, double> lr{{"lambda", 0.01}, {"iters", 500}};
  static const std::map<std::string, double> svm{{"C", 1.0}, {"epochs", 50}};
  static const std::map<std::string, double> rf{{"n_trees", 100}, {"min_leaf", 1}};
  static const std::map<std::string, double> mp{
      {"h", 16}, {"lr", 0.1}, {"epochs", 200}, {"batch", 32}};
  static const std::map<std::string, double> ks{};
  switch (kind) {
    case ModelKind::kNB: return nb;
    case ModelKind::kLR: return lr;
    case ModelKind::kSVM: return svm;
    case ModelKind::kRF: return rf;
    case ModelKind::kMP: return mp;
    case ModelKind::kKsZhang: return ks;
  }
  return ks;
}

std::vector<std::map<std::string, double>> default_grid(ModelKind kind) {
  std::vector<std::map<std::string, double>> grid;
  switch (kind) {
    case ModelKind::kNB:
      for (double floor : {1e-9, 1e-6}) grid.push_back({{"var_floor", floor}});
      break;
    case ModelKind::kLR:
      for (double lambda : {0.0, 0.01, 0.1}) grid.push_back({{"lambda", lambda}});
      break;
    case ModelKind::kSVM:
      for (double c : {0.1, 1.0, 10.0}) grid.push_back({{"C", c}});
      break;
    case ModelKind::kRF:
      for (double trees : {100.0, 200.0}) {
        for (double leaf : {1.0, 5.0}) {
          grid.push_back({{"n_trees", trees}, {"min_leaf", leaf}});
        }
      }
      break;
    case ModelKind::kMP:
      for (double h : {8.0, 16.0}) {
        for (double lr : {0.01, 0.1}) grid.push_back({{"h", h}, {"lr", lr}});
      }
      break;
    case ModelKind::kKsZhang:
      grid.push_back({});
      break;
  }
  return grid;
}

ModelSpec ModelSpec::make(ModelKind kind, const std::map<std::string, double>& overrides,
                          std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.hyper = default_hyperparameters(kind);
  for (const auto& [name, value] : overrides) {
    const auto it = spec.hyper.find(name);
    if (it == spec.hyper.end()) {
      throw DataError(std::string("unknown hyperparameter '") + name + "' for " +
                      to_string(kind));
    }
    it->second = value;
  }
  return spec;
}

double ModelSpec::get(const std::string& name) const {
  const auto it = hyper.find(name);
  if (it == hyper.end()) {
    throw DataError(std::string("hyperparameter '") + name + "' not set for " +
                    to_string(kind));
  }
  return it->second;
}

int DecisionTree::predict(std::span<const double> x) const {
  int node = 0;
  for (;;) {
    const Node& n = nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) return n.leaf_class;
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

// ---------------------------------------------------------------- NB

namespace {

void fit_nb(TrainedModel& model, const Dataset& train) {
  const std::size_t d = train.width();
  const double var_floor = model.spec.get("var_floor");
  model.nb_mean.assign(d, {});
  model.nb_var.assign(d, {});
  const auto n = static_cast<double>(train.n());
  for (int c = 0; c < kNumClasses; ++c) {
    model.log_prior[c] = std::log((model.class_count[c] + 1.0) / (n + kNumClasses));
  }
  for (std::size_t f = 0; f < d; ++f) {
    std::array<double, kNumClasses> sum{}, sum_sq{};
    for (std::size_t i = 0; i < train.n(); ++i) {
      sum[train.y[i]] += train.x[i][f];
    }
    std::array<double, kNumClasses> mean{};
    for (int c = 0; c < kNumClasses; ++c) {
      if (model.class_count[c] > 0) mean[c] = sum[c] / model.class_count[c];
    }
    for (std::size_t i = 0; i < train.n(); ++i) {
      const double dev = train.x[i][f] - mean[train.y[i]];
      sum_sq[train.y[i]] += dev * dev;
    }
    for (int c = 0; c < kNumClasses; ++c) {
      model.nb_mean[f][c] = mean[c];
      const double var =
          model.class_count[c] > 0 ? sum_sq[c] / model.class_count[c] : 0.0;
      model.nb_var[f][c] = std::max(var, var_floor);
    }
  }
}

int predict_nb(const TrainedModel& model, std::span<const double> x) {
  std::array<double, kNumClasses> logp{};
  std::array<bool, kNumClasses> eligible{};
  for (int c = 0; c < kNumClasses; ++c) {
    eligible[c] = model.class_count[c] > 0;
    if (!eligible[c]) continue;
    double lp = model.log_prior[c];
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double var = model.nb_var[f][c];
      const double dev = x[f] - model.nb_mean[f][c];
      lp += -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - dev * dev / (2.0 * var);
    }
    logp[c] = lp;
  }
  return argmax3(logp, eligible);
}

// ---------------------------------------------------------------- LR

struct LrState {
  std::vector<std::vector<double>> z;  // standardized rows + bias column
  std::vector<int> y;
  double lambda = 0.0;
};

double lr_loss(const LrState& s, const std::vector<std::vector<double>>& w) {
  const std::size_t n = s.z.size();
  const std::size_t dim = s.z.front().size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kNumClasses> logits{};
    for (int c = 0; c < kNumClasses; ++c) {
      logits[c] = std::inner_product(s.z[i].begin(), s.z[i].end(), w[c].begin(), 0.0);
    }
    const auto p = softmax3(logits);
    loss -= std::log(std::max(p[s.y[i]], 1e-300));
  }
  loss /= static_cast<double>(n);
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t j = 0; j + 1 < dim; ++j) {  // bias unpenalized
      loss += 0.5 * s.lambda * w[c][j] * w[c][j];
    }
  }
  return loss;
}

std::vector<std::vector<double>> lr_grad(const LrState& s,
                                         const std::vector<std::vector<double>>& w) {
  const std::size_t n = s.z.size();
  const std::size_t dim = s.z.front().size();
  std::vector<std::vector<double>> g(kNumClasses, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kNumClasses> logits{};
    for (int c = 0; c < kNumClasses; ++c) {
      logits[c] = std::inner_product(s.z[i].begin(), s.z[i].end(), w[c].begin(), 0.0);
    }
    const auto p = softmax3(logits);
    for (int c = 0; c < kNumClasses; ++c) {
      const double delta = p[c] - (s.y[i] == c ? 1.0 : 0.0);
      for (std::size_t j = 0; j < dim; ++j) g[c][j] += delta * s.z[i][j];
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t j = 0; j < dim; ++j) {
      g[c][j] /= static_cast<double>(n);
      if (j + 1 < dim) g[c][j] += s.lambda * w[c][j];
    }
  }
  return g;
}

void fit_lr(TrainedModel& model, const Dataset& train) {
  const std::size_t d = train.width();
  LrState s;
  s.lambda = model.spec.get("lambda");
  s.y = train.y;
  s.z.reserve(train.n());
  for (const auto& row : train.x) {
    auto z = standardize_row(row, model.feat_mean, model.feat_sd);
    z.push_back(1.0);
    s.z.push_back(std::move(z));
  }
  const int iters = static_cast<int>(model.spec.get("iters"));
  std::vector<std::vector<double>> w(kNumClasses, std::vector<double>(d + 1, 0.0));
  double loss = lr_loss(s, w);
  model.lr_loss_trace.push_back(loss);
  // Gradient descent with backtracking: halve the step until the loss stops
  // increasing, grow it gently after accepted steps. Loss is monotone
  // non-increasing by construction.
  double eta = 1.0;
  std::vector<std::vector<double>> g;
  for (int it = 0; it < iters; ++it) {
    g = lr_grad(s, w);
    bool accepted = false;
    while (eta >= 1e-18) {
      auto cand = w;
      for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t j = 0; j <= d; ++j) cand[c][j] -= eta * g[c][j];
      }
      const double cand_loss = lr_loss(s, cand);
      if (cand_loss <= loss) {
        w = std::move(cand);
        loss = cand_loss;
        eta = std::min(eta * 1.2, 100.0);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
    model.lr_loss_trace.push_back(loss);
  }
  g = lr_grad(s, w);
  double norm_sq = 0.0;
  for (const auto& row : g) {
    for (double v : row) norm_sq += v * v;
  }
  model.lr_final_grad_norm = std::sqrt(norm_sq);
  model.lr_w = std::move(w);
}

int predict_lr(const TrainedModel& model, std::span<const double> x) {
  auto z = standardize_row(x, model.feat_mean, model.feat_sd);
  z.push_back(1.0);
  std::array<double, kNumClasses> logits{};
  std::array<bool, kNumClasses> eligible{};
  for (int c = 0; c < kNumClasses; ++c) {
    eligible[c] = model.class_count[c] > 0;
    logits[c] = std::inner_product(z.begin(), z.end(), model.lr_w[c].begin(), 0.0);
  }
  return argmax3(logits, eligible);
}

// ---------------------------------------------------------------- SVM

void fit_svm(TrainedModel& model, const Dataset& train) {
  const std::size_t d = train.width();
  const std::size_t n = train.n();
  const double c_param = model.spec.get("C");
  const int epochs = static_cast<int>(model.spec.get("epochs"));
  const double lambda = 1.0 / (c_param * static_cast<double>(n));

  std::vector<std::vector<double>> z;
  z.reserve(n);
  for (const auto& row : train.x) {
    auto zr = standardize_row(row, model.feat_mean, model.feat_sd);
    zr.push_back(1.0);  // bias as a regularized constant feature
    z.push_back(std::move(zr));
  }

  model.svm_w.assign(kNumClasses, std::vector<double>(d, 0.0));
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> w(d + 1, 0.0);
    Rng rng(mix64(model.spec.seed, static_cast<std::uint64_t>(c)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      rng.shuffle(order);
      for (const std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double yi = train.y[i] == c ? 1.0 : -1.0;
        const double margin =
            yi * std::inner_product(z[i].begin(), z[i].end(), w.begin(), 0.0);
        const double keep = 1.0 - 1.0 / static_cast<double>(t);  // 1 - eta*lambda
        for (std::size_t j = 0; j <= d; ++j) w[j] *= keep;
        if (margin < 1.0) {
          for (std::size_t j = 0; j <= d; ++j) w[j] += eta * yi * z[i][j];
        }
      }
    }
    model.svm_b[c] = w[d];
    w.pop_back();
    model.svm_w[c] = std::move(w);
  }
}

int predict_svm(const TrainedModel& model, std::span<const double> x) {
  const auto z = standardize_row(x, model.feat_mean, model.feat_sd);
  std::array<double, kNumClasses> decision{};
  std::array<bool, kNumClasses> eligible{};
  for (int c = 0; c < kNumClasses; ++c) {
    eligible[c] = model.class_count[c] > 0;
    decision[c] = model.svm_b[c] +
                  std::inner_product(z.begin(), z.end(), model.svm_w[c].begin(), 0.0);
  }
  return argmax3(decision, eligible);
}

// ---------------------------------------------------------------- RF

double gini_term(const std::array<int, kNumClasses>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return (1.0 - sum_sq) * total;
}

struct TreeBuilder {
  const Dataset& data;
  int min_leaf;
  int mtry;
  Rng& rng;
  DecisionTree tree;
  std::vector<int> feature_pool;

  TreeBuilder(const Dataset& data, int min_leaf, int mtry, Rng& rng)
      : data(data), min_leaf(min_leaf), mtry(mtry), rng(rng) {
    feature_pool.resize(data.width());
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
  }

  int make_leaf(const std::array<int, kNumClasses>& counts) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (counts[c] > counts[best]) best = c;
    }
    DecisionTree::Node node;
    node.leaf_class = best;
    tree.nodes.push_back(node);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  int build(std::vector<std::size_t>& idx) {
    std::array<int, kNumClasses> counts{};
    for (const std::size_t i : idx) ++counts[data.y[i]];
    const int total = static_cast<int>(idx.size());
    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    if (pure || total < 2 * min_leaf) return make_leaf(counts);

    // mtry distinct candidate features, sorted so ties resolve by index.
    for (int j = 0; j < mtry; ++j) {
      std::swap(feature_pool[j],
                feature_pool[j + rng.index(feature_pool.size() - j)]);
    }
    std::vector<int> candidates(feature_pool.begin(), feature_pool.begin() + mtry);
    std::sort(candidates.begin(), candidates.end());

    const double node_impurity = gini_term(counts, total);
    double best_impurity = node_impurity - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> values(idx.size());
    for (const int f : candidates) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        values[k] = {data.x[idx[k]][f], data.y[idx[k]]};
      }
      std::sort(values.begin(), values.end());
      std::array<int, kNumClasses> left{};
      std::array<int, kNumClasses> right = counts;
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        ++left[values[k].second];
        --right[values[k].second];
        if (values[k + 1].first <= values[k].first) continue;
        const int n_left = static_cast<int>(k) + 1;
        const int n_right = total - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double impurity = gini_term(left, n_left) + gini_term(right, n_right);
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = (values[k].first + values[k + 1].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return make_leaf(counts);

    std::vector<std::size_t> left_idx, right_idx;
    for (const std::size_t i : idx) {
      (data.x[i][best_feature] <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    DecisionTree::Node node;
    node.feature = best_feature;
    node.threshold = best_threshold;
    tree.nodes.push_back(node);
    const int id = static_cast<int>(tree.nodes.size()) - 1;
    const int left_id = build(left_idx);
    const int right_id = build(right_idx);
    tree.nodes[id].left = left_id;
    tree.nodes[id].right = right_id;
    return id;
  }
};

void fit_rf(TrainedModel& model, const Dataset& train) {
  const int n_trees = static_cast<int>(model.spec.get("n_trees"));
  const int min_leaf = std::max(1, static_cast<int>(model.spec.get("min_leaf")));
  if (n_trees < 1) throw DataError("n_trees must be >= 1");
  const std::size_t n = train.n();
  const int mtry = std::max(
      1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(train.width())))));
  model.trees.resize(n_trees);
  model.oob.resize(n_trees);
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(mix64(model.spec.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample(n);
    std::vector<bool> drawn(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      sample[i] = rng.index(n);
      drawn[sample[i]] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!drawn[i]) model.oob[t].push_back(i);
    }
    TreeBuilder builder(train, min_leaf, mtry, rng);
    builder.build(sample);
    model.trees[t] = std::move(builder.tree);
  }
}

int predict_rf(const TrainedModel& model, std::span<const double> x) {
  std::array<double, kNumClasses> votes{};
  for (const auto& tree : model.trees) ++votes[tree.predict(x)];
  std::array<bool, kNumClasses> eligible{};
  for (int c = 0; c < kNumClasses; ++c) eligible[c] = true;
  return argmax3(votes, eligible);
}

// ---------------------------------------------------------------- MP

struct MpForward {
  std::vector<double> hidden;               // activations, size h
  std::array<double, kNumClasses> probs{};  // softmax output
};

MpForward mp_forward(const MpParams& params, std::span<const double> x) {
  const std::size_t h = params.w1.size();
  const std::size_t d = x.size();
  MpForward out;
  out.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    double a = params.w1[j][d];
    for (std::size_t f = 0; f < d; ++f) a += params.w1[j][f] * x[f];
    out.hidden[j] = sigmoid(a);
  }
  std::array<double, kNumClasses> logits{};
  for (int c = 0; c < kNumClasses; ++c) {
    double a = params.w2[c][h];
    for (std::size_t j = 0; j < h; ++j) a += params.w2[c][j] * out.hidden[j];
    logits[c] = a;
  }
  out.probs = softmax3(logits);
  return out;
}

}  // namespace

double mp_loss(const MpParams& params, const std::vector<std::vector<double>>& rows,
               const std::vector<int>& labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto fwd = mp_forward(params, rows[i]);
    loss -= std::log(std::max(fwd.probs[labels[i]], 1e-300));
  }
  return loss / static_cast<double>(rows.size());
}

MpParams mp_gradient(const MpParams& params, const std::vector<std::vector<double>>& rows,
                     const std::vector<int>& labels) {
  const std::size_t h = params.w1.size();
  const std::size_t d = params.w1.front().size() - 1;
  MpParams grad;
  grad.w1.assign(h, std::vector<double>(d + 1, 0.0));
  grad.w2.assign(kNumClasses, std::vector<double>(h + 1, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto fwd = mp_forward(params, rows[i]);
    std::array<double, kNumClasses> delta2{};
    for (int c = 0; c < kNumClasses; ++c) {
      delta2[c] = fwd.probs[c] - (labels[i] == c ? 1.0 : 0.0);
      for (std::size_t j = 0; j < h; ++j) grad.w2[c][j] += delta2[c] * fwd.hidden[j];
      grad.w2[c][h] += delta2[c];
    }
    for (std::size_t j = 0; j < h; ++j) {
      double back = 0.0;
      for (int c = 0; c < kNumClasses; ++c) back += delta2[c] * params.w2[c][j];
      const double delta1 = back * fwd.hidden[j] * (1.0 - fwd.hidden[j]);
      for (std::size_t f = 0; f < d; ++f) grad.w1[j][f] += delta1 * rows[i][f];
      grad.w1[j][d] += delta1;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (auto& row : grad.w1) {
    for (double& v : row) v *= inv_n;
  }
  for (auto& row : grad.w2) {
    for (double& v : row) v *= inv_n;
  }
  return grad;
}

namespace {

void fit_mp(TrainedModel& model, const Dataset& train) {
  const std::size_t d = train.width();
  const std::size_t n = train.n();
  const auto h = static_cast<std::size_t>(model.spec.get("h"));
  const double lr = model.spec.get("lr");
  const int epochs = static_cast<int>(model.spec.get("epochs"));
  const auto batch = std::max<std::size_t>(1, static_cast<std::size_t>(model.spec.get("batch")));
  if (h < 1) throw DataError("h must be >= 1");

  std::vector<std::vector<double>> z;
  z.reserve(n);
  for (const auto& row : train.x) {
    z.push_back(standardize_row(row, model.feat_mean, model.feat_sd));
  }

  Rng init_rng(mix64(model.spec.seed, 0));
  const double scale1 = std::sqrt(1.0 / static_cast<double>(d + 1));
  const double scale2 = std::sqrt(1.0 / static_cast<double>(h + 1));
  model.mp.w1.assign(h, std::vector<double>(d + 1));
  model.mp.w2.assign(kNumClasses, std::vector<double>(h + 1));
  for (auto& row : model.mp.w1) {
    for (double& v : row) v = (init_rng.uniform() * 2.0 - 1.0) * scale1;
  }
  for (auto& row : model.mp.w2) {
    for (double& v : row) v = (init_rng.uniform() * 2.0 - 1.0) * scale2;
  }

  Rng order_rng(mix64(model.spec.seed, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> batch_rows;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      batch_rows.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch_rows.push_back(z[order[k]]);
        batch_labels.push_back(train.y[order[k]]);
      }
      const MpParams grad = mp_gradient(model.mp, batch_rows, batch_labels);
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t f = 0; f <= d; ++f) model.mp.w1[j][f] -= lr * grad.w1[j][f];
      }
      for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t j = 0; j <= h; ++j) model.mp.w2[c][j] -= lr * grad.w2[c][j];
      }
    }
    model.mp_loss_trace.push_back(mp_loss(model.mp, z, train.y));
  }
}

int predict_mp(const TrainedModel& model, std::span<const double> x) {
  const auto z = standardize_row(x, model.feat_mean, model.feat_sd);
  const auto fwd = mp_forward(model.mp, z);
  std::array<double, kNumClasses> probs{};
  std::array<bool, kNumClasses> eligible{};
  for (int c = 0; c < kNumClasses; ++c) {
    probs[c] = fwd.probs[c];
    eligible[c] = model.class_count[c] > 0;
  }
  return argmax3(probs, eligible);
}

// ---------------------------------------------------------------- KS_Zhang

void fit_ks(TrainedModel& model, const Dataset& train) {
  if (train.width() != kFeatureCount) {
    throw DataError("KS_Zhang expects the full canonical feature matrix");
  }
  model.ks_qlen_col = feature_index("q_term_avg");
  model.ks_rel_col = feature_index("SERP_click_rank_avg");
  std::vector<double> scores;
  scores.reserve(train.n());
  for (const auto& row : train.x) {
    scores.push_back(ks_zhang_score(0.0, row[model.ks_qlen_col], row[model.ks_rel_col]));
  }
  if (scores.size() < 2) {
    throw DegenerateDistributionError("KS_Zhang: need >= 2 training rows");
  }
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) {
    throw DegenerateDistributionError("KS_Zhang: constant training scores");
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(scores.size() - 1));
  if (sd == 0.0) {
    throw DegenerateDistributionError("KS_Zhang: constant training scores");
  }
  model.ks_mean = mean;
  model.ks_sd = sd;
}

int predict_ks(const TrainedModel& model, std::span<const double> x) {
  const double score =
      ks_zhang_score(0.0, x[model.ks_qlen_col], x[model.ks_rel_col]);
  return static_cast<int>(bin_class((score - model.ks_mean) / model.ks_sd));
}

}  // namespace

TrainedModel fit(const ModelSpec& spec, const Dataset& train) {
  train.validate();
  TrainedModel model;
  model.spec = spec;
  model.n_features = static_cast<int>(train.width());
  for (int label : train.y) ++model.class_count[label];

  const bool standardized = spec.kind == ModelKind::kLR || spec.kind == ModelKind::kSVM ||
                            spec.kind == ModelKind::kMP;
  if (standardized) {
    const std::size_t d = train.width();
    model.feat_mean.assign(d, 0.0);
    model.feat_sd.assign(d, 1.0);
    for (std::size_t f = 0; f < d; ++f) {
      double mean = 0.0;
      for (const auto& row : train.x) mean += row[f];
      mean /= static_cast<double>(train.n());
      double ss = 0.0;
      for (const auto& row : train.x) ss += (row[f] - mean) * (row[f] - mean);
      const double sd = train.n() > 1
                            ? std::sqrt(ss / static_cast<double>(train.n() - 1))
                            : 0.0;
      model.feat_mean[f] = mean;
      model.feat_sd[f] = sd > 0.0 ? sd : 1.0;  // constant columns pass through
    }
  }

  switch (spec.kind) {
    case ModelKind::kNB: fit_nb(model, train); break;
    case ModelKind::kLR: fit_lr(model, train); break;
    case ModelKind::kSVM: fit_svm(model, train); break;
    case ModelKind::kRF: fit_rf(model, train); break;
    case ModelKind::kMP: fit_mp(model, train); break;
    case ModelKind::kKsZhang: fit_ks(model, train); break;
  }
  return model;
}

int TrainedModel::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_features) {
    throw DataError("predict: feature width mismatch");
  }
  switch (spec.kind) {
    case ModelKind::kNB: return predict_nb(*this, x);
    case ModelKind::kLR: return predict_lr(*this, x);
    case ModelKind::kSVM: return predict_svm(*this, x);
    case ModelKind::kRF: return predict_rf(*this, x);
    case ModelKind::kMP: return predict_mp(*this, x);
    case ModelKind::kKsZhang: return predict_ks(*this, x);
  }
  throw DataError("predict: unknown model kind");
}

std::vector<int> TrainedModel::predict_batch(
    const std::vector<std::vector<double>>& rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(predict(row));
  return out;
}

double ks_zhang_score(double saved, double q_len, double rel_mean) {
  return -1.466 + 0.039 * saved + 0.147 * q_len + 0.130 * rel_mean;
}

std::vector<KnowledgeClass> ks_zhang_classify(const std::vector<double>& scores) {
  const std::vector<double> z = standardize(scores);
  std::vector<KnowledgeClass> out;
  out.reserve(z.size());
  for (double v : z) out.push_back(bin_class(v));
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {

constexpr int kModelFormatVersion = 1;

nlohmann::json matrix_json(const std::vector<std::vector<double>>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : m) out.push_back(row);
  return out;
}

std::vector<std::vector<double>> matrix_from(const nlohmann::json& j) {
  std::vector<std::vector<double>> out;
  for (const auto& row : j) out.push_back(row.get<std::vector<double>>());
  return out;
}

}  // namespace

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json doc;
  doc["format"] = "sessionlens.model";
  doc["version"] = kModelFormatVersion;
  doc["kind"] = to_string(spec.kind);
  doc["seed"] = spec.seed;
  doc["hyper"] = spec.hyper;
  doc["n_features"] = n_features;
  doc["class_count"] = class_count;
  if (!feat_mean.empty()) {
    doc["standardize"] = {{"mean", feat_mean}, {"sd", feat_sd}};
  }
  switch (spec.kind) {
    case ModelKind::kNB: {
      doc["log_prior"] = log_prior;
      nlohmann::json means = nlohmann::json::array(), vars = nlohmann::json::array();
      for (const auto& per_class : nb_mean) means.push_back(per_class);
      for (const auto& per_class : nb_var) vars.push_back(per_class);
      doc["nb_mean"] = std::move(means);
      doc["nb_var"] = std::move(vars);
      break;
    }
    case ModelKind::kLR:
      doc["w"] = matrix_json(lr_w);
      doc["loss_trace"] = lr_loss_trace;
      doc["final_grad_norm"] = lr_final_grad_norm;
      break;
    case ModelKind::kSVM:
      doc["w"] = matrix_json(svm_w);
      doc["b"] = svm_b;
      break;
    case ModelKind::kRF: {
      nlohmann::json trees_json = nlohmann::json::array();
      for (const auto& tree : trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
          nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_class});
        }
        trees_json.push_back(std::move(nodes));
      }
      doc["trees"] = std::move(trees_json);
      doc["oob"] = oob;
      break;
    }
    case ModelKind::kMP:
      doc["w1"] = matrix_json(mp.w1);
      doc["w2"] = matrix_json(mp.w2);
      doc["loss_trace"] = mp_loss_trace;
      break;
    case ModelKind::kKsZhang:
      doc["ks_mean"] = ks_mean;
      doc["ks_sd"] = ks_sd;
      doc["ks_qlen_col"] = ks_qlen_col;
      doc["ks_rel_col"] = ks_rel_col;
      break;
  }
  return doc;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "sessionlens.model") {
    throw SchemaError("not a model document");
  }
  if (doc.value("version", -1) != kModelFormatVersion) {
    throw SchemaError("unsupported model document version");
  }
  TrainedModel model;
  try {
    model.spec.kind = parse_model_kind(doc.at("kind").get<std::string>());
    model.spec.seed = doc.at("seed").get<std::uint64_t>();
    model.spec.hyper = doc.at("hyper").get<std::map<std::string, double>>();
    model.n_features = doc.at("n_features").get<int>();
    model.class_count = doc.at("class_count").get<std::array<int, kNumClasses>>();
    if (doc.contains("standardize")) {
      model.feat_mean = doc["standardize"].at("mean").get<std::vector<double>>();
      model.feat_sd = doc["standardize"].at("sd").get<std::vector<double>>();
    }
    switch (model.spec.kind) {
      case ModelKind::kNB: {
        model.log_prior = doc.at("log_prior").get<std::array<double, kNumClasses>>();
        for (const auto& row : doc.at("nb_mean")) {
          model.nb_mean.push_back(row.get<std::array<double, kNumClasses>>());
        }
        for (const auto& row : doc.at("nb_var")) {
          model.nb_var.push_back(row.get<std::array<double, kNumClasses>>());
        }
        break;
      }
      case ModelKind::kLR:
        model.lr_w = matrix_from(doc.at("w"));
        model.lr_loss_trace = doc.at("loss_trace").get<std::vector<double>>();
        model.lr_final_grad_norm = doc.at("final_grad_norm").get<double>();
        break;
      case ModelKind::kSVM:
        model.svm_w = matrix_from(doc.at("w"));
        model.svm_b = doc.at("b").get<std::array<double, kNumClasses>>();
        break;
      case ModelKind::kRF: {
        for (const auto& tree_json : doc.at("trees")) {
          DecisionTree tree;
          for (const auto& n : tree_json) {
            DecisionTree::Node node;
            node.feature = n.at(0).get<int>();
            node.threshold = n.at(1).get<double>();
            node.left = n.at(2).get<int>();
            node.right = n.at(3).get<int>();
            node.leaf_class = n.at(4).get<int>();
            tree.nodes.push_back(node);
          }
          model.trees.push_back(std::move(tree));
        }
        model.oob = doc.at("oob").get<std::vector<std::vector<std::size_t>>>();
        break;
      }
      case ModelKind::kMP:
        model.mp.w1 = matrix_from(doc.at("w1"));
        model.mp.w2 = matrix_from(doc.at("w2"));
        model.mp_loss_trace = doc.at("loss_trace").get<std::vector<double>>();
        break;
      case ModelKind::kKsZhang:
        model.ks_mean = doc.at("ks_mean").get<double>();
        model.ks_sd = doc.at("ks_sd").get<double>();
        model.ks_qlen_col = doc.at("ks_qlen_col").get<int>();
        model.ks_rel_col = doc.at("ks_rel_col").get<int>();
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model document: ") + e.what());
  }
  return model;
}

void TrainedModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << to_json().dump(2) << '\n';
}

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

}  // namespace sessionlens

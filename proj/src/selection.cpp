#include "sessionlens/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sessionlens/csv.hpp"
#include "sessionlens/errors.hpp"
#include "sessionlens/parallel.hpp"

namespace sessionlens {

namespace {

struct Moments {
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations
};

Moments moments_of(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.ss += (v - m.mean) * (v - m.mean);
  return m;
}

double pearson_given(std::span<const double> x, const Moments& mx,
                     std::span<const double> y, const Moments& my) {
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx.mean) * (y[i] - my.mean);
  }
  // Cauchy-Schwarz caps |sxy| at sqrt(ss_x * ss_y); rounding can nudge the
  // quotient past 1, and duplicated columns should land on 1 exactly.
  if (sxy * sxy >= mx.ss * my.ss) return sxy > 0 ? 1.0 : -1.0;
  return sxy / std::sqrt(mx.ss * my.ss);
}

}  // namespace

const char* to_string(Target target) {
  return target == Target::kGain ? "gain" : "state";
}

Target parse_target(std::string_view text) {
  if (text == "gain") return Target::kGain;
  if (text == "state") return Target::kState;
  throw DataError("unknown target '" + std::string(text) + "' (want gain|state)");
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2) throw DataError("pearson: need at least 2 points");
  const Moments mx = moments_of(x);
  const Moments my = moments_of(y);
  if (mx.ss == 0.0 || my.ss == 0.0) {
    throw DegenerateDistributionError("pearson: zero variance input");
  }
  return pearson_given(x, mx, y, my);
}

double RelevanceTable::corr_of(std::string_view feature, Target target) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i] == feature) return corr(i, target);
  }
  throw DataError("relevance table has no feature '" + std::string(feature) + "'");
}

RelevanceTable RelevanceTable::parse(const std::string& csv_text) {
  const csv::Table table = csv::parse(csv_text);
  const int c_feature = table.column("feature");
  const int c_gain = table.column("corr_gain");
  const int c_state = table.column("corr_state");
  if (c_feature < 0 || c_gain < 0 || c_state < 0) {
    throw DataError("relevance CSV: need header feature,corr_gain,corr_state");
  }
  RelevanceTable out;
  for (const auto& row : table.rows) {
    out.features.push_back(row[c_feature]);
    out.corr_gain.push_back(std::stod(row[c_gain]));
    out.corr_state.push_back(std::stod(row[c_state]));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::fabs(out.corr_gain[i]) > 1.0 || std::fabs(out.corr_state[i]) > 1.0) {
      throw DataError("relevance CSV: correlation outside [-1,1] for " + out.features[i]);
    }
  }
  return out;
}

RelevanceTable RelevanceTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open relevance CSV: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RelevanceTable::to_csv() const {
  std::ostringstream os;
  os << "feature,corr_gain,corr_state\n";
  for (std::size_t i = 0; i < size(); ++i) {
    os << features[i] << ',' << csv::format_value(corr_gain[i]) << ','
       << csv::format_value(corr_state[i]) << '\n';
  }
  return os.str();
}

RelevanceTable compute_relevance(const FeatureMatrix& matrix,
                                 std::span<const double> gain,
                                 std::span<const double> state,
                                 std::vector<std::string>* warnings) {
  if (gain.size() != matrix.n_rows() || state.size() != matrix.n_rows()) {
    throw DataError("compute_relevance: target length != matrix rows");
  }
  if (matrix.n_rows() < 2) throw DataError("compute_relevance: need >= 2 rows");
  const Moments m_gain = moments_of(gain);
  const Moments m_state = moments_of(state);
  auto warn = [warnings](const std::string& message) {
    if (warnings) warnings->push_back(message);
  };
  if (m_gain.ss == 0.0) warn("gain target has zero variance; correlations set to 0");
  if (m_state.ss == 0.0) warn("state target has zero variance; correlations set to 0");

  RelevanceTable out;
  out.features.assign(matrix.names.begin(), matrix.names.end());
  out.corr_gain.assign(matrix.names.size(), 0.0);
  out.corr_state.assign(matrix.names.size(), 0.0);
  for (std::size_t f = 0; f < matrix.names.size(); ++f) {
    const std::vector<double> col = matrix.column(f);
    const Moments mc = moments_of(col);
    if (mc.ss == 0.0) {
      warn("feature " + matrix.names[f] + " is constant; correlation set to 0");
      continue;
    }
    if (m_gain.ss != 0.0) out.corr_gain[f] = pearson_given(col, mc, gain, m_gain);
    if (m_state.ss != 0.0) out.corr_state[f] = pearson_given(col, mc, state, m_state);
  }
  return out;
}

std::vector<int> FeatureSubset::indices() const {
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    const int idx = feature_index(name);
    if (idx < 0) throw DataError("subset names non-canonical feature '" + name + "'");
    out.push_back(idx);
  }
  return out;
}

FeatureSubset relevance_filter(const RelevanceTable& table, Target target,
                               double threshold) {
  if (threshold < 0.0) throw DataError("relevance threshold must be >= 0");
  FeatureSubset subset;
  subset.threshold = threshold;
  subset.target = target;
  // Emit in canonical order regardless of the table's row order.
  for (const auto name : canonical_feature_names()) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table.features[i] == name && std::fabs(table.corr(i, target)) >= threshold) {
        subset.names.emplace_back(name);
        break;
      }
    }
  }
  return subset;
}

FeatureSubset redundancy_prune(const FeatureMatrix& matrix,
                               const FeatureSubset& subset, double tau,
                               const RelevanceTable& table, Target target,
                               std::vector<std::string>* warnings) {
  if (tau <= 0.0 || tau > 1.0) throw DataError("tau must be in (0, 1]");
  FeatureSubset out = subset;
  out.tau = tau;
  out.target = target;
  const std::vector<int> cols = subset.indices();
  const std::size_t m = cols.size();
  if (m < 2) return out;

  std::vector<std::vector<double>> columns(m);
  std::vector<Moments> moments(m);
  std::vector<bool> constant(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    columns[i] = matrix.column(static_cast<std::size_t>(cols[i]));
    moments[i] = moments_of(columns[i]);
    if (moments[i].ss == 0.0) {
      constant[i] = true;
      if (warnings) {
        warnings->push_back("feature " + subset.names[i] +
                            " is constant; pairwise correlation set to 0");
      }
    }
  }

  // Upper triangle of |r|, row-parallel; constant columns read as 0.
  std::vector<std::vector<double>> abs_r(m, std::vector<double>(m, 0.0));
  parallel_for(m, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (constant[i] || constant[j]) continue;
      abs_r[i][j] = std::fabs(pearson_given(columns[i], moments[i], columns[j], moments[j]));
    }
  });

  std::vector<bool> alive(m, true);
  for (;;) {
    std::size_t best_i = m, best_j = m;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!alive[j]) continue;
        if (abs_r[i][j] > best) {
          best = abs_r[i][j];
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best < tau) break;
    const double rel_i = std::fabs(table.corr_of(subset.names[best_i], target));
    const double rel_j = std::fabs(table.corr_of(subset.names[best_j], target));
    // Lower relevance loses; j is the later canonical name, so ties drop j.
    alive[rel_i < rel_j ? best_i : best_j] = false;
  }

  out.names.clear();
  for (std::size_t i = 0; i < m; ++i) {
    if (alive[i]) out.names.push_back(subset.names[i]);
  }
  return out;
}

}  // namespace sessionlens

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/parallel.hpp"
#include "dialign/rng.hpp"
#include "dialign/version.hpp"

namespace dialign {

using Matrix = std::vector<std::vector<double>>;

enum class ClassWeight { None, Balanced, BalancedSubsample };
enum class Normalization { Standardize, UnitNormalize, None };
enum class Criterion { Gini, Entropy };
enum class MaxFeatures { Sqrt, Log2, All };

inline const char* to_string(ClassWeight w) {
  switch (w) {
    case ClassWeight::None: return "none";
    case ClassWeight::Balanced: return "balanced";
    case ClassWeight::BalancedSubsample: return "balanced_subsample";
  }
  return "?";
}

inline ClassWeight class_weight_from_string(const std::string& s) {
  if (s == "none") return ClassWeight::None;
  if (s == "balanced") return ClassWeight::Balanced;
  if (s == "balanced_subsample") return ClassWeight::BalancedSubsample;
  throw DataError("unknown class weight \"" + s + "\"");
}

inline const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::Standardize: return "standardize";
    case Normalization::UnitNormalize: return "unit_normalize";
    case Normalization::None: return "none";
  }
  return "?";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "standardize") return Normalization::Standardize;
  if (s == "unit_normalize") return Normalization::UnitNormalize;
  if (s == "none") return Normalization::None;
  throw DataError("unknown normalization \"" + s + "\"");
}

inline const char* to_string(Criterion c) {
  return c == Criterion::Gini ? "gini" : "entropy";
}

inline Criterion criterion_from_string(const std::string& s) {
  if (s == "gini") return Criterion::Gini;
  if (s == "entropy") return Criterion::Entropy;
  throw DataError("unknown criterion \"" + s + "\"");
}

inline const char* to_string(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::Log2: return "log2";
    case MaxFeatures::All: return "all";
  }
  return "?";
}

inline MaxFeatures max_features_from_string(const std::string& s) {
  if (s == "sqrt") return MaxFeatures::Sqrt;
  if (s == "log2") return MaxFeatures::Log2;
  if (s == "all") return MaxFeatures::All;
  throw DataError("unknown max_features \"" + s + "\"");
}

struct Prediction {
  std::vector<Label> labels;
  std::vector<double> scores;  // P(HumanBot) or vote fraction, per row
};

// ---------------------------------------------------------------------------
// Feature normalization, fitted on training rows only.
// ---------------------------------------------------------------------------

struct Normalizer {
  Normalization kind = Normalization::None;
  std::vector<double> mean;     // Standardize only
  std::vector<double> inv_std;  // 0 for constant columns -> output 0

  static Normalizer fit(Normalization kind, const Matrix& X) {
    Normalizer nz;
    nz.kind = kind;
    if (kind != Normalization::Standardize || X.empty()) return nz;
    const std::size_t p = X[0].size();
    nz.mean.assign(p, 0.0);
    nz.inv_std.assign(p, 0.0);
    for (const auto& row : X)
      for (std::size_t j = 0; j < p; ++j) nz.mean[j] += row[j];
    const double inv_n = 1.0 / static_cast<double>(X.size());
    for (auto& m : nz.mean) m *= inv_n;
    std::vector<double> var(p, 0.0);
    for (const auto& row : X)
      for (std::size_t j = 0; j < p; ++j) {
        const double d = row[j] - nz.mean[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < p; ++j) {
      const double sd = std::sqrt(var[j] * inv_n);  // population std
      nz.inv_std[j] = sd > 0.0 ? 1.0 / sd : 0.0;
    }
    return nz;
  }

  std::vector<double> apply(const std::vector<double>& row) const {
    if (kind == Normalization::None) return row;
    std::vector<double> out(row.size());
    if (kind == Normalization::Standardize) {
      if (row.size() != mean.size())
        throw DataError("normalizer: row width " + std::to_string(row.size()) +
                        " != fitted width " + std::to_string(mean.size()));
      for (std::size_t j = 0; j < row.size(); ++j)
        out[j] = (row[j] - mean[j]) * inv_std[j];
      return out;
    }
    // UnitNormalize: row-wise L2, zero rows pass through
    double norm_sq = 0.0;
    for (double x : row) norm_sq += x * x;
    if (norm_sq == 0.0) return row;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * inv;
    return out;
  }

  Matrix apply_all(const Matrix& X) const {
    Matrix out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(apply(row));
    return out;
  }
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z), overflow-safe
inline double log1pexp(double z) {
  if (z > 35.0) return z;
  return std::log1p(std::exp(z));
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct LbfgsResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with Armijo backtracking. `vg` evaluates the objective
// and writes its gradient. Deterministic: no randomness, fixed history m=10.
template <typename ValueGrad>
LbfgsResult lbfgs_minimize(std::vector<double> x, ValueGrad&& vg,
                           std::size_t max_iter, double tol) {
  constexpr std::size_t kHistory = 10;
  constexpr double kArmijo = 1e-4;
  const std::size_t n = x.size();
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  std::vector<double> g(n), g_new(n);
  double f = vg(x, g);
  LbfgsResult res;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    if (inf_norm(g) <= tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    // two-loop recursion for d = -H g
    std::vector<double> d = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t j = 0; j < n; ++j) d[j] -= alpha[k] * y_hist[k][j];
    }
    if (!s_hist.empty()) {
      const double gamma =
          dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t j = 0; j < n; ++j) d[j] += (alpha[k] - beta) * s_hist[k][j];
    }
    for (auto& v : d) v = -v;

    double gd = dot(g, d);
    if (gd >= 0.0) {  // not a descent direction: restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t j = 0; j < n; ++j) d[j] = -g[j];
      gd = dot(g, d);
      if (gd >= 0.0) break;  // gradient numerically zero
    }

    double step = 1.0;
    std::vector<double> x_new(n);
    double f_new = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < n; ++j) x_new[j] = x[j] + step * d[j];
      f_new = vg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search stalled at machine precision

    std::vector<double> s_vec(n), y_vec(n);
    for (std::size_t j = 0; j < n; ++j) {
      s_vec[j] = x_new[j] - x[j];
      y_vec[j] = g_new[j] - g[j];
    }
    const double sy = dot(s_vec, y_vec);
    // curvature check is relative to the pair's scale, or problems whose
    // objective is uniformly tiny (e.g. C near 0) would never build curvature
    const double pair_scale = std::sqrt(dot(s_vec, s_vec) * dot(y_vec, y_vec));
    if (sy > 1e-12 * pair_scale && pair_scale > 0.0) {
      if (s_hist.size() == kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
    }
    x = std::move(x_new);
    f = f_new;
    g = g_new;
    if (res.iterations >= max_iter) break;
  }
  if (!res.converged && inf_norm(g) <= tol) res.converged = true;
  res.x = std::move(x);
  return res;
}

// n / (2 * n_class) per label, over the given labels
inline std::pair<double, double> balanced_weights(const std::vector<Label>& y) {
  std::size_t n_hh = 0;
  for (Label l : y)
    if (l == Label::HumanHuman) ++n_hh;
  const std::size_t n_hb = y.size() - n_hh;
  const double n = static_cast<double>(y.size());
  return {n_hh ? n / (2.0 * static_cast<double>(n_hh)) : 0.0,
          n_hb ? n / (2.0 * static_cast<double>(n_hb)) : 0.0};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// L2-regularized logistic regression. HumanBot is the positive class; the
// objective is
//   J(w, b) = 0.5 ||w||^2 + C * sum_i s_i * log(1 + exp(-y_i (w.x_i + b)))
// with the intercept unregularized and s_i the per-sample class weight.
// ---------------------------------------------------------------------------

struct LogRegConfig {
  double c_value = 1.0;
  ClassWeight class_weight = ClassWeight::None;
  Normalization normalization = Normalization::Standardize;
  std::size_t max_iterations = 10000;
  double gradient_tolerance = 1e-6;
};

struct LogRegModel {
  LogRegConfig config;
  Normalizer normalizer;
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline LogRegModel train_logreg(const Matrix& X, const std::vector<Label>& y,
                                const LogRegConfig& cfg) {
  if (X.empty()) throw DataError("logreg: empty training set");
  if (X.size() != y.size()) throw DataError("logreg: rows/labels length mismatch");
  if (cfg.class_weight == ClassWeight::BalancedSubsample)
    throw DataError("logreg: balanced_subsample weights need bootstrap resampling");
  if (cfg.c_value <= 0.0) throw DataError("logreg: C must be positive");
  const bool has_hh = std::find(y.begin(), y.end(), Label::HumanHuman) != y.end();
  const bool has_hb = std::find(y.begin(), y.end(), Label::HumanBot) != y.end();
  if (!has_hh || !has_hb) throw DataError("logreg: training data has a single class");

  LogRegModel model;
  model.config = cfg;
  model.normalizer = Normalizer::fit(cfg.normalization, X);
  const Matrix Xn = model.normalizer.apply_all(X);
  const std::size_t n = Xn.size();
  const std::size_t p = Xn[0].size();

  std::vector<double> sign(n), weight(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) sign[i] = y[i] == Label::HumanBot ? 1.0 : -1.0;
  if (cfg.class_weight == ClassWeight::Balanced) {
    auto [w_hh, w_hb] = detail::balanced_weights(y);
    for (std::size_t i = 0; i < n; ++i)
      weight[i] = y[i] == Label::HumanBot ? w_hb : w_hh;
  }

  // theta = [w_0..w_{p-1}, b]
  auto value_grad = [&](const std::vector<double>& theta, std::vector<double>& grad) {
    double obj = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      obj += 0.5 * theta[j] * theta[j];
      grad[j] = theta[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double margin = theta[p];
      for (std::size_t j = 0; j < p; ++j) margin += theta[j] * Xn[i][j];
      const double z = sign[i] * margin;
      obj += cfg.c_value * weight[i] * detail::log1pexp(-z);
      // d/dz log(1+e^{-z}) = -(1 - sigmoid(z))
      const double coeff =
          -cfg.c_value * weight[i] * (1.0 - detail::sigmoid(z)) * sign[i];
      for (std::size_t j = 0; j < p; ++j) grad[j] += coeff * Xn[i][j];
      grad[p] += coeff;
    }
    return obj;
  };

  auto res = detail::lbfgs_minimize(std::vector<double>(p + 1, 0.0), value_grad,
                                    cfg.max_iterations, cfg.gradient_tolerance);
  model.weights.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(p));
  model.bias = res.x[p];
  model.iterations = res.iterations;
  model.converged = res.converged;
  return model;
}

inline Prediction predict(const LogRegModel& m, const Matrix& X) {
  Prediction pred;
  pred.labels.reserve(X.size());
  pred.scores.reserve(X.size());
  for (const auto& raw : X) {
    if (raw.size() != m.weights.size())
      throw DataError("logreg: input width " + std::to_string(raw.size()) +
                      " != model width " + std::to_string(m.weights.size()));
    const std::vector<double> row = m.normalizer.apply(raw);
    const double score = detail::sigmoid(detail::dot(row, m.weights) + m.bias);
    pred.scores.push_back(score);
    pred.labels.push_back(score >= 0.5 ? Label::HumanBot : Label::HumanHuman);
  }
  return pred;
}

// ---------------------------------------------------------------------------
// Random forest of CART trees grown to purity (or fewer than 2 samples).
// Splits are "x <= threshold goes left" with midpoint thresholds; candidate
// features come from a seeded permutation scanned until max_features
// non-constant features have been evaluated. Equal-gain ties go to the lowest
// feature index, then the lowest threshold.
// ---------------------------------------------------------------------------

struct ForestConfig {
  std::size_t n_trees = 1000;
  ClassWeight class_weight = ClassWeight::None;
  Criterion criterion = Criterion::Gini;
  MaxFeatures max_features = MaxFeatures::Sqrt;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Label prediction = Label::HumanHuman;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<double> importance;  // per-feature MDI, normalized to sum 1
  bool has_split = false;
};

struct ForestModel {
  ForestConfig config;
  std::size_t n_features = 0;
  Label vote_tie_break = Label::HumanHuman;  // most frequent training class
  std::vector<Tree> trees;
};

namespace detail {

inline double impurity(Criterion c, double wa, double wb) {
  const double total = wa + wb;
  if (total <= 0.0) return 0.0;
  const double pa = wa / total;
  const double pb = wb / total;
  if (c == Criterion::Gini) return 1.0 - pa * pa - pb * pb;
  double h = 0.0;
  if (pa > 0.0) h -= pa * std::log(pa);
  if (pb > 0.0) h -= pb * std::log(pb);
  return h;
}

inline std::size_t feature_budget(MaxFeatures mf, std::size_t p) {
  switch (mf) {
    case MaxFeatures::Sqrt:
      return std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
    case MaxFeatures::Log2:
      return std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(p)))));
    case MaxFeatures::All:
      return p;
  }
  return p;
}

struct TreeBuilder {
  const Matrix& X;
  const std::vector<Label>& y;
  const std::vector<double>& sample_weight;  // per drawn sample
  const std::vector<std::size_t>& samples;   // drawn row indices
  Criterion criterion;
  std::size_t k_features;
  Rng& rng;
  Tree tree;
  std::vector<double> raw_importance;
  double root_weight = 0.0;

  std::int32_t build(std::vector<std::size_t> idx) {
    // idx holds positions into `samples` so duplicate bootstrap draws keep
    // their own weight
    double wa = 0.0, wb = 0.0;
    std::size_t na = 0, nb = 0;
    for (std::size_t pos : idx) {
      if (y[samples[pos]] == Label::HumanHuman) {
        wa += sample_weight[pos];
        ++na;
      } else {
        wb += sample_weight[pos];
        ++nb;
      }
    }
    if (tree.nodes.empty()) root_weight = wa + wb;

    const std::int32_t node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (na == 0 || nb == 0 || idx.size() < 2) {
      tree.nodes[node_id].prediction = leaf_label(wa, wb);
      return node_id;
    }

    const std::size_t p = X[0].size();
    std::vector<std::size_t> order(p);
    for (std::size_t j = 0; j < p; ++j) order[j] = j;
    rng.shuffle(order);

    double best_gain = -1.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    const double parent_impurity = impurity(criterion, wa, wb);
    const double node_weight = wa + wb;

    std::vector<std::pair<double, std::size_t>> vals;  // (value, pos)
    std::size_t evaluated = 0;
    for (std::size_t f : order) {
      if (evaluated == k_features) break;
      vals.clear();
      vals.reserve(idx.size());
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t pos : idx) {
        const double v = X[samples[pos]][f];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        vals.emplace_back(v, pos);
      }
      if (lo == hi) continue;  // constant at this node
      ++evaluated;
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_a = 0.0, left_b = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const auto& [v, pos] = vals[i];
        if (y[samples[pos]] == Label::HumanHuman)
          left_a += sample_weight[pos];
        else
          left_b += sample_weight[pos];
        if (v == vals[i + 1].first) continue;  // not a boundary
        // adjacent doubles can round the midpoint up to the right value, which
        // would send the whole node left and recurse forever; use the left
        // value instead, "x <= thr" still separates the boundary
        double thr = v + (vals[i + 1].first - v) / 2.0;
        if (thr == vals[i + 1].first) thr = v;
        const double right_a = wa - left_a;
        const double right_b = wb - left_b;
        const double wl = left_a + left_b;
        const double wr = right_a + right_b;
        const double gain = parent_impurity -
                            (wl / node_weight) * impurity(criterion, left_a, left_b) -
                            (wr / node_weight) * impurity(criterion, right_a, right_b);
        const bool better =
            gain > best_gain ||
            (gain == best_gain &&
             (f < best_feature || (f == best_feature && thr < best_threshold)));
        if (better) {
          best_gain = gain;
          best_feature = f;
          best_threshold = thr;
        }
      }
    }

    if (best_gain < 0.0) {  // every scanned feature constant: make a leaf
      tree.nodes[node_id].prediction = leaf_label(wa, wb);
      return node_id;
    }

    raw_importance[best_feature] += (node_weight / root_weight) * best_gain;
    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t pos : idx) {
      if (X[samples[pos]][best_feature] <= best_threshold)
        left_idx.push_back(pos);
      else
        right_idx.push_back(pos);
    }
    idx.clear();
    idx.shrink_to_fit();
    const std::int32_t left = build(std::move(left_idx));
    const std::int32_t right = build(std::move(right_idx));
    tree.nodes[node_id].feature = static_cast<std::int32_t>(best_feature);
    tree.nodes[node_id].threshold = best_threshold;
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
  }

  static Label leaf_label(double wa, double wb) {
    // weighted majority; ties fall to HumanHuman
    return wb > wa ? Label::HumanBot : Label::HumanHuman;
  }
};

inline Label tree_predict(const Tree& t, const std::vector<double>& row) {
  std::int32_t node = 0;
  while (t.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = t.nodes[static_cast<std::size_t>(node)];
    node = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                     : nd.right;
  }
  return t.nodes[static_cast<std::size_t>(node)].prediction;
}

}  // namespace detail

inline ForestModel train_forest(const Matrix& X, const std::vector<Label>& y,
                                const ForestConfig& cfg, unsigned threads = 1) {
  if (X.empty()) throw DataError("forest: empty training set");
  if (X.size() != y.size()) throw DataError("forest: rows/labels length mismatch");
  if (cfg.n_trees == 0) throw DataError("forest: n_trees must be positive");
  const std::size_t n = X.size();
  const std::size_t p = X[0].size();
  if (p == 0) throw DataError("forest: zero-width feature rows");

  ForestModel model;
  model.config = cfg;
  model.n_features = p;
  model.trees.resize(cfg.n_trees);
  {
    std::size_t n_hh = 0;
    for (Label l : y)
      if (l == Label::HumanHuman) ++n_hh;
    model.vote_tie_break =
        n_hh >= n - n_hh ? Label::HumanHuman : Label::HumanBot;  // tie -> HumanHuman
  }

  auto [full_w_hh, full_w_hb] = detail::balanced_weights(y);
  const std::size_t k = detail::feature_budget(cfg.max_features, p);

  parallel_for(cfg.n_trees, threads, [&](std::size_t t) {
    Rng rng(cfg.seed + t);
    std::vector<std::size_t> samples(n);
    if (cfg.bootstrap) {
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
    } else {
      for (std::size_t i = 0; i < n; ++i) samples[i] = i;
    }

    std::vector<double> sample_weight(n, 1.0);
    if (cfg.class_weight == ClassWeight::Balanced) {
      for (std::size_t i = 0; i < n; ++i)
        sample_weight[i] = y[samples[i]] == Label::HumanBot ? full_w_hb : full_w_hh;
    } else if (cfg.class_weight == ClassWeight::BalancedSubsample) {
      // weights recomputed from the labels actually drawn for this tree
      std::vector<Label> drawn(n);
      for (std::size_t i = 0; i < n; ++i) drawn[i] = y[samples[i]];
      auto [w_hh, w_hb] = detail::balanced_weights(drawn);
      for (std::size_t i = 0; i < n; ++i)
        sample_weight[i] = drawn[i] == Label::HumanBot ? w_hb : w_hh;
    }

    detail::TreeBuilder builder{X, y, sample_weight, samples,
                                cfg.criterion, k, rng, {}, std::vector<double>(p, 0.0),
                                0.0};
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    builder.build(std::move(idx));

    double total = 0.0;
    for (double v : builder.raw_importance) total += v;
    builder.tree.importance.assign(p, 0.0);
    if (total > 0.0) {
      builder.tree.has_split = true;
      for (std::size_t j = 0; j < p; ++j)
        builder.tree.importance[j] = builder.raw_importance[j] / total;
    }
    model.trees[t] = std::move(builder.tree);
  });
  return model;
}

inline Prediction predict(const ForestModel& m, const Matrix& X) {
  Prediction pred;
  pred.labels.reserve(X.size());
  pred.scores.reserve(X.size());
  for (const auto& row : X) {
    if (row.size() != m.n_features)
      throw DataError("forest: input width " + std::to_string(row.size()) +
                      " != model width " + std::to_string(m.n_features));
    std::size_t votes_hb = 0;
    for (const auto& t : m.trees)
      if (detail::tree_predict(t, row) == Label::HumanBot) ++votes_hb;
    const std::size_t votes_hh = m.trees.size() - votes_hb;
    pred.scores.push_back(static_cast<double>(votes_hb) /
                          static_cast<double>(m.trees.size()));
    Label l;
    if (votes_hb > votes_hh)
      l = Label::HumanBot;
    else if (votes_hh > votes_hb)
      l = Label::HumanHuman;
    else
      l = m.vote_tie_break;
    pred.labels.push_back(l);
  }
  return pred;
}

// Mean of per-tree normalized MDI over trees that made at least one split,
// renormalized to sum 1. Sorted by weight descending, names break ties.
inline std::vector<std::pair<std::string, double>> feature_importance(
    const ForestModel& m, const std::vector<std::string>& names) {
  if (names.size() != m.n_features)
    throw DataError("importance: name count != feature count");
  std::vector<double> acc(m.n_features, 0.0);
  std::size_t contributing = 0;
  for (const auto& t : m.trees) {
    if (!t.has_split) continue;
    ++contributing;
    for (std::size_t j = 0; j < m.n_features; ++j) acc[j] += t.importance[j];
  }
  if (contributing == 0)
    throw DataError("importance: no tree made a split (constant features?)");
  double total = 0.0;
  for (auto& v : acc) {
    v /= static_cast<double>(contributing);
    total += v;
  }
  for (auto& v : acc) v /= total;  // renormalize; total > 0 when any tree split
  std::vector<std::pair<std::string, double>> out;
  out.reserve(m.n_features);
  for (std::size_t j = 0; j < m.n_features; ++j) out.emplace_back(names[j], acc[j]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Non-learning baselines
// ---------------------------------------------------------------------------

enum class BaselineKind { MostFrequent, MostInfrequent, Stratified };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::MostFrequent: return "most_frequent";
    case BaselineKind::MostInfrequent: return "most_infrequent";
    case BaselineKind::Stratified: return "stratified";
  }
  return "?";
}

inline BaselineKind baseline_from_string(const std::string& s) {
  if (s == "most_frequent") return BaselineKind::MostFrequent;
  if (s == "most_infrequent") return BaselineKind::MostInfrequent;
  if (s == "stratified") return BaselineKind::Stratified;
  throw DataError("unknown baseline \"" + s + "\"");
}

struct BaselineModel {
  BaselineKind kind = BaselineKind::MostFrequent;
  Label constant = Label::HumanHuman;
  double p_human_bot = 0.5;  // Stratified only
  std::uint64_t seed = 0;
};

inline BaselineModel train_baseline(const std::vector<Label>& y, BaselineKind kind,
                                    std::uint64_t seed = 0) {
  if (y.empty()) throw DataError("baseline: empty training labels");
  std::size_t n_hh = 0;
  for (Label l : y)
    if (l == Label::HumanHuman) ++n_hh;
  const std::size_t n_hb = y.size() - n_hh;
  BaselineModel m;
  m.kind = kind;
  m.seed = seed;
  m.p_human_bot = static_cast<double>(n_hb) / static_cast<double>(y.size());
  // both tie cases fall to HumanHuman (first label in declaration order)
  if (kind == BaselineKind::MostFrequent)
    m.constant = n_hb > n_hh ? Label::HumanBot : Label::HumanHuman;
  else if (kind == BaselineKind::MostInfrequent)
    m.constant = n_hh > n_hb ? Label::HumanBot : Label::HumanHuman;
  return m;
}

inline Prediction predict(const BaselineModel& m, std::size_t n) {
  Prediction pred;
  pred.labels.reserve(n);
  pred.scores.reserve(n);
  if (m.kind == BaselineKind::Stratified) {
    Rng rng(m.seed);  // restarted every call: repeat predictions are identical
    for (std::size_t i = 0; i < n; ++i) {
      const bool hb = rng.bernoulli(m.p_human_bot);
      pred.labels.push_back(hb ? Label::HumanBot : Label::HumanHuman);
      pred.scores.push_back(m.p_human_bot);
    }
    return pred;
  }
  const double score = m.constant == Label::HumanBot ? 1.0 : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pred.labels.push_back(m.constant);
    pred.scores.push_back(score);
  }
  return pred;
}

// ---------------------------------------------------------------------------
// Model persistence. Every file carries a "version"; loading rejects files
// without one or with a version this build does not understand.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LogRegModel& m) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["model_type"] = "logreg";
  j["config"] = {{"c_value", m.config.c_value},
                 {"class_weight", to_string(m.config.class_weight)},
                 {"normalization", to_string(m.config.normalization)},
                 {"max_iterations", m.config.max_iterations},
                 {"gradient_tolerance", m.config.gradient_tolerance}};
  j["normalizer"] = {{"kind", to_string(m.normalizer.kind)},
                     {"mean", m.normalizer.mean},
                     {"inv_std", m.normalizer.inv_std}};
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  return j;
}

inline nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["model_type"] = "forest";
  j["config"] = {{"n_trees", m.config.n_trees},
                 {"class_weight", to_string(m.config.class_weight)},
                 {"criterion", to_string(m.config.criterion)},
                 {"max_features", to_string(m.config.max_features)},
                 {"bootstrap", m.config.bootstrap},
                 {"seed", m.config.seed}};
  j["n_features"] = m.n_features;
  j["vote_tie_break"] = to_string(m.vote_tie_break);
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right,
                       std::string(to_string(nd.prediction))});
    trees.push_back({{"nodes", std::move(nodes)},
                     {"importance", t.importance},
                     {"has_split", t.has_split}});
  }
  j["trees"] = std::move(trees);
  return j;
}

inline nlohmann::json to_json(const BaselineModel& m) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["model_type"] = "baseline";
  j["kind"] = to_string(m.kind);
  j["constant"] = to_string(m.constant);
  j["p_human_bot"] = m.p_human_bot;
  j["seed"] = m.seed;
  return j;
}

namespace detail {

inline void check_model_version(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object() || !j.contains("version"))
    throw DataError(origin + ": model file has no version field");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kFormatVersion)
    throw DataError(origin + ": unsupported model version " + j["version"].dump());
}

}  // namespace detail

inline LogRegModel logreg_from_json(const nlohmann::json& j,
                                    const std::string& origin = "<json>") {
  detail::check_model_version(j, origin);
  if (j.value("model_type", "") != "logreg")
    throw DataError(origin + ": not a logreg model");
  LogRegModel m;
  const auto& c = j.at("config");
  m.config.c_value = c.at("c_value").get<double>();
  m.config.class_weight = class_weight_from_string(c.at("class_weight"));
  m.config.normalization = normalization_from_string(c.at("normalization"));
  m.config.max_iterations = c.at("max_iterations").get<std::size_t>();
  m.config.gradient_tolerance = c.at("gradient_tolerance").get<double>();
  const auto& nz = j.at("normalizer");
  m.normalizer.kind = normalization_from_string(nz.at("kind"));
  m.normalizer.mean = nz.at("mean").get<std::vector<double>>();
  m.normalizer.inv_std = nz.at("inv_std").get<std::vector<double>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.converged = j.at("converged").get<bool>();
  return m;
}

inline ForestModel forest_from_json(const nlohmann::json& j,
                                    const std::string& origin = "<json>") {
  detail::check_model_version(j, origin);
  if (j.value("model_type", "") != "forest")
    throw DataError(origin + ": not a forest model");
  ForestModel m;
  const auto& c = j.at("config");
  m.config.n_trees = c.at("n_trees").get<std::size_t>();
  m.config.class_weight = class_weight_from_string(c.at("class_weight"));
  m.config.criterion = criterion_from_string(c.at("criterion"));
  m.config.max_features = max_features_from_string(c.at("max_features"));
  m.config.bootstrap = c.at("bootstrap").get<bool>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.vote_tie_break = label_from_string(j.at("vote_tie_break"));
  for (const auto& tj : j.at("trees")) {
    Tree t;
    for (const auto& nj : tj.at("nodes")) {
      TreeNode nd;
      nd.feature = nj.at(0).get<std::int32_t>();
      nd.threshold = nj.at(1).get<double>();
      nd.left = nj.at(2).get<std::int32_t>();
      nd.right = nj.at(3).get<std::int32_t>();
      nd.prediction = label_from_string(nj.at(4));
      t.nodes.push_back(nd);
    }
    t.importance = tj.at("importance").get<std::vector<double>>();
    t.has_split = tj.at("has_split").get<bool>();
    m.trees.push_back(std::move(t));
  }
  return m;
}

inline void save_model_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": malformed model file (" + e.what() + ")");
  }
  detail::check_model_version(j, path);
  return j;
}

}  // namespace dialign

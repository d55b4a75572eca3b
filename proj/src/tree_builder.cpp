#include "tree_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "gpusentinel/error.hpp"

namespace gpusentinel::detail {

Matrix to_matrix(const Dataset& dataset, const Scaler* scaler) {
  Matrix m;
  m.rows = dataset.rows.size();
  m.cols = dataset.dimension();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : dataset.rows) {
    if (r.values.size() != m.cols) throw DataError("row length does not match feature names");
    if (scaler) {
      const auto z = apply_standardizer(*scaler, r.values);
      m.data.insert(m.data.end(), z.begin(), z.end());
    } else {
      m.data.insert(m.data.end(), r.values.begin(), r.values.end());
    }
  }
  return m;
}

std::vector<int> to_targets(const Dataset& dataset) {
  std::vector<int> y;
  y.reserve(dataset.rows.size());
  for (const auto& r : dataset.rows) {
    if (!r.label) throw DataError("training rows must be labelled");
    y.push_back(*r.label == Label::miner ? 1 : 0);
  }
  return y;
}

namespace {

// Class counts. Weighted Gini of a split is minimised exactly when
//   S = (c0l^2 + c1l^2) / nl + (c0r^2 + c1r^2) / nr
// is maximised; S is compared as an exact fraction.
struct GiniStats {
  long long n = 0;
  long long c1 = 0;

  void add(std::size_t i, std::span<const int> y) {
    ++n;
    c1 += y[i];
  }
  void remove(std::size_t i, std::span<const int> y) {
    --n;
    c1 -= y[i];
  }
  __int128 square_sum() const {
    const __int128 c0 = n - c1;
    return c0 * c0 + static_cast<__int128>(c1) * c1;
  }
};

struct GiniScore {
  __int128 num = 0;
  __int128 den = 1;
};

GiniScore gini_score(const GiniStats& l, const GiniStats& r) {
  return {l.square_sum() * r.n + r.square_sum() * l.n, static_cast<__int128>(l.n) * r.n};
}

bool greater(const GiniScore& a, const GiniScore& b) { return a.num * b.den > b.num * a.den; }

struct NewtonStats {
  long long n = 0;
  double g = 0.0;

  void add(std::size_t i, std::span<const double> grad) {
    ++n;
    g += grad[i];
  }
  void remove(std::size_t i, std::span<const double> grad) {
    --n;
    g -= grad[i];
  }
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
};

std::vector<std::size_t> candidate_features(std::size_t cols, const TreeBuildOptions& opt) {
  std::vector<std::size_t> f(cols);
  std::iota(f.begin(), f.end(), 0);
  if (opt.max_features == 0 || opt.max_features >= cols) return f;
  if (!opt.rng) throw UsageError("feature subsampling needs a random source");
  for (std::size_t i = 0; i < opt.max_features; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(opt.rng->below(cols - i));
    std::swap(f[i], f[j]);
  }
  f.resize(opt.max_features);
  std::sort(f.begin(), f.end());
  return f;
}

// Sorted (value, row) pairs of one feature over the node's rows.
void sorted_column(const Matrix& x, std::size_t feature, std::span<const std::size_t> idx,
                   std::vector<std::pair<double, std::size_t>>& out) {
  out.clear();
  for (auto i : idx) out.emplace_back(x.at(i, feature), i);
  std::sort(out.begin(), out.end());
}

class ClassificationBuilder {
 public:
  ClassificationBuilder(const Matrix& x, std::span<const int> y, const TreeBuildOptions& opt)
      : x_(x), y_(y), opt_(opt) {}

  DecisionTree build(std::vector<std::size_t> indices) {
    grow(indices, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    GiniStats parent;
    for (auto i : idx) parent.add(i, y_);
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes[id].value = static_cast<double>(parent.c1) / static_cast<double>(parent.n);

    const bool pure = parent.c1 == 0 || parent.c1 == parent.n;
    if (pure || depth >= opt_.max_depth || idx.size() < 2 * std::max<std::size_t>(opt_.min_samples_leaf, 1))
      return id;
    const auto split = best_split(idx, parent);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_.at(i, split->feature) <= split->threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree_.nodes[id].feature = static_cast<int>(split->feature);
    tree_.nodes[id].threshold = split->threshold;
    const int l = grow(left, depth + 1);
    tree_.nodes[id].left = l;
    const int r = grow(right, depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  std::optional<Split> best_split(std::span<const std::size_t> idx, const GiniStats& parent) {
    const std::size_t min_leaf = std::max<std::size_t>(opt_.min_samples_leaf, 1);
    // The split must beat the unsplit node: S_parent = square_sum / n.
    GiniScore best{parent.square_sum(), parent.n};
    std::optional<Split> found;
    for (auto f : candidate_features(x_.cols, opt_)) {
      sorted_column(x_, f, idx, column_);
      GiniStats left, right = parent;
      for (std::size_t k = 0; k + 1 < column_.size(); ++k) {
        left.add(column_[k].second, y_);
        right.remove(column_[k].second, y_);
        const double a = column_[k].first, b = column_[k + 1].first;
        if (!(a < b)) continue;
        if (static_cast<std::size_t>(left.n) < min_leaf || static_cast<std::size_t>(right.n) < min_leaf) continue;
        const auto score = gini_score(left, right);
        if (greater(score, best)) {
          best = score;
          found = Split{f, (a + b) / 2.0};
        }
      }
    }
    return found;
  }

  const Matrix& x_;
  std::span<const int> y_;
  const TreeBuildOptions& opt_;
  DecisionTree tree_;
  std::vector<std::pair<double, std::size_t>> column_;
};

class NewtonBuilder {
 public:
  NewtonBuilder(const Matrix& x, std::span<const double> g, std::span<const double> h, double scale,
                const TreeBuildOptions& opt)
      : x_(x), g_(g), h_(h), scale_(scale), opt_(opt) {}

  DecisionTree build(std::vector<std::size_t> indices) {
    grow(indices, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    NewtonStats parent;
    double hess = 0.0;
    for (auto i : idx) {
      parent.add(i, g_);
      hess += h_[i];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes[id].value = scale_ * parent.g / std::max(hess, 1e-12);

    if (depth >= opt_.max_depth || idx.size() < 2 * std::max<std::size_t>(opt_.min_samples_leaf, 1)) return id;
    const auto split = best_split(idx, parent);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_.at(i, split->feature) <= split->threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree_.nodes[id].feature = static_cast<int>(split->feature);
    tree_.nodes[id].threshold = split->threshold;
    const int l = grow(left, depth + 1);
    tree_.nodes[id].left = l;
    const int r = grow(right, depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  // Maximises gl^2/nl + gr^2/nr (squared-error reduction).
  std::optional<Split> best_split(std::span<const std::size_t> idx, const NewtonStats& parent) {
    const std::size_t min_leaf = std::max<std::size_t>(opt_.min_samples_leaf, 1);
    const double base = parent.g * parent.g / static_cast<double>(parent.n);
    double best = base + 1e-12 * (std::abs(base) + 1.0);
    std::optional<Split> found;
    for (auto f : candidate_features(x_.cols, opt_)) {
      sorted_column(x_, f, idx, column_);
      NewtonStats left, right = parent;
      for (std::size_t k = 0; k + 1 < column_.size(); ++k) {
        left.add(column_[k].second, g_);
        right.remove(column_[k].second, g_);
        const double a = column_[k].first, b = column_[k + 1].first;
        if (!(a < b)) continue;
        if (static_cast<std::size_t>(left.n) < min_leaf || static_cast<std::size_t>(right.n) < min_leaf) continue;
        const double score = left.g * left.g / static_cast<double>(left.n) +
                             right.g * right.g / static_cast<double>(right.n);
        if (score > best) {
          best = score;
          found = Split{f, (a + b) / 2.0};
        }
      }
    }
    return found;
  }

  const Matrix& x_;
  std::span<const double> g_;
  std::span<const double> h_;
  double scale_;
  const TreeBuildOptions& opt_;
  DecisionTree tree_;
  std::vector<std::pair<double, std::size_t>> column_;
};

}  // namespace

DecisionTree build_classification_tree(const Matrix& x, std::span<const int> y, std::vector<std::size_t> indices,
                                       const TreeBuildOptions& options) {
  if (indices.empty()) throw DataError("cannot grow a tree on zero rows");
  return ClassificationBuilder(x, y, options).build(std::move(indices));
}

DecisionTree build_newton_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                               double scale, const TreeBuildOptions& options) {
  if (x.rows == 0) throw DataError("cannot grow a tree on zero rows");
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  return NewtonBuilder(x, gradient, hessian, scale, options).build(std::move(all));
}

}  // namespace gpusentinel::detail

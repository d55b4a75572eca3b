#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/rng.hpp"
#include "tree_builder.hpp"

namespace gpusentinel {

double DecisionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) throw DataError("empty decision tree");
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

namespace {

Model base_model(ModelKind kind, const Dataset& train) {
  if (train.rows.empty()) throw DataError("training set is empty");
  Model m;
  m.kind = kind;
  m.feature_names = train.feature_names;
  m.meta.dataset_fingerprint = dataset_fingerprint(train);
  return m;
}

double logistic_loss(std::span<const double> f, std::span<const int> y) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double z = f[i];
    total += std::max(z, 0.0) - z * y[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(f.size());
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Model train_tree(const Dataset& train, const TreeHyper& hyper) {
  Model m = base_model(ModelKind::tree, train);
  m.hyper.tree = hyper;
  const auto x = detail::to_matrix(train);
  const auto y = detail::to_targets(train);
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  detail::TreeBuildOptions opt;
  opt.max_depth = hyper.max_depth;
  opt.min_samples_leaf = hyper.min_samples_leaf;
  m.params = TreeEnsemble{{detail::build_classification_tree(x, y, std::move(all), opt)}};
  return m;
}

Model train_forest(const Dataset& train, const ForestHyper& hyper, std::uint64_t seed, Exec exec) {
  if (hyper.tree_count == 0) throw UsageError("forest needs at least one tree");
  Model m = base_model(ModelKind::forest, train);
  const auto x = detail::to_matrix(train);
  const auto y = detail::to_targets(train);

  ForestHyper resolved = hyper;
  if (resolved.max_features == 0)
    resolved.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols))));
  resolved.max_features = std::min(resolved.max_features, x.cols);
  m.hyper.forest = resolved;
  m.meta.seed = seed;

  // Each tree owns a pre-derived seed, so the schedule cannot change results.
  std::vector<DecisionTree> trees(resolved.tree_count);
  const auto grow = [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> idx(x.rows);
    if (resolved.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(x.rows));
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    detail::TreeBuildOptions opt;
    opt.max_depth = resolved.max_depth;
    opt.min_samples_leaf = resolved.min_samples_leaf;
    opt.max_features = resolved.max_features;
    opt.rng = &rng;
    trees[t] = detail::build_classification_tree(x, y, std::move(idx), opt);
  };
  const auto n = static_cast<long long>(trees.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long t = 0; t < n; ++t) grow(static_cast<std::size_t>(t));
  } else {
    for (long long t = 0; t < n; ++t) grow(static_cast<std::size_t>(t));
  }
  m.params = TreeEnsemble{std::move(trees)};
  return m;
}

Model train_gbm(const Dataset& train, const GbmHyper& hyper, TrainingLog* log) {
  if (!(hyper.learning_rate > 0.0)) throw UsageError("gbm learning rate must be positive");
  Model m = base_model(ModelKind::gbm, train);
  m.hyper.gbm = hyper;
  const auto x = detail::to_matrix(train);
  const auto y = detail::to_targets(train);

  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double p = positives / static_cast<double>(y.size());
  if (p <= 0.0 || p >= 1.0) throw DataError("degenerate class balance");

  GbmParams params;
  params.base_score = std::log(p / (1.0 - p));
  std::vector<double> f(x.rows, params.base_score);
  std::vector<double> grad(x.rows), hess(x.rows);
  if (log) log->loss.push_back(logistic_loss(f, y));

  detail::TreeBuildOptions opt;
  opt.max_depth = hyper.max_depth;
  opt.min_samples_leaf = hyper.min_samples_leaf;
  for (std::size_t round = 0; round < hyper.rounds; ++round) {
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double prob = sigmoid(f[i]);
      grad[i] = y[i] - prob;
      hess[i] = prob * (1.0 - prob);
    }
    auto tree = detail::build_newton_tree(x, grad, hess, hyper.learning_rate, opt);
    for (std::size_t i = 0; i < x.rows; ++i) f[i] += tree.predict(x.row(i));
    params.trees.push_back(std::move(tree));
    if (log) log->loss.push_back(logistic_loss(f, y));
  }
  m.params = std::move(params);
  return m;
}

}  // namespace gpusentinel

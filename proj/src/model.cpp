#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"
#include "gpusentinel/rng.hpp"

namespace gpusentinel {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::tree: return "tree";
    case ModelKind::forest: return "forest";
    case ModelKind::gbm: return "gbm";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::logreg, ModelKind::tree, ModelKind::forest, ModelKind::gbm, ModelKind::mlp})
    if (to_string(k) == text) return k;
  throw UsageError("unknown model kind '" + std::string(text) + "'");
}

std::string_view display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return "Logistic Regression";
    case ModelKind::tree: return "Decision Tree";
    case ModelKind::forest: return "Random Forest";
    case ModelKind::gbm: return "Gradient Boosting";
    case ModelKind::mlp: return "Neural Network";
  }
  return "unknown";
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const std::size_t total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
    const auto& r = dataset.rows[i];
    if (!r.label) throw DataError("split needs labelled rows");
    by_class[*r.label == Label::miner ? 1 : 0].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      std::ostringstream msg;
      msg << "class imbalance: class " << c << " (" << (c ? "miner" : "benign") << ") has "
          << by_class[c].size() << " rows, stratified split needs at least 2 per class";
      throw DataError(msg.str());
    }
  }

  // Largest-remainder apportionment of round(fraction * n) test rows.
  const std::size_t n = dataset.rows.size();
  const auto total_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  for (int c = 0; c < 2; ++c) {
    const double exact = test_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
  }
  // At most two leftover rows; larger remainder first, class 0 on ties.
  std::size_t leftover = total_test - take[0] - take[1];
  const int first = remainder[1] > remainder[0] ? 1 : 0;
  for (int c : {first, 1 - first}) {
    if (leftover == 0) break;
    ++take[c];
    --leftover;
  }
  for (int c = 0; c < 2; ++c) take[c] = std::clamp<std::size_t>(take[c], 1, by_class[c].size() - 1);

  std::vector<bool> in_test(n, false);
  for (int c = 0; c < 2; ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    auto& idx = by_class[c];
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
    for (std::size_t k = 0; k < take[c]; ++k) in_test[idx[k]] = true;
  }

  Dataset train, test;
  train.feature_names = test.feature_names = dataset.feature_names;
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).rows.push_back(dataset.rows[i]);
  return {std::move(train), std::move(test)};
}

void set_hyperparameter(Hyperparams& h, std::string_view key, std::string_view value) {
  const auto count = [&](std::size_t& out) {
    long long v = 0;
    if (!parse_int64(value, v) || v < 0) throw UsageError("hyperparameter " + std::string(key) + " needs a count");
    out = static_cast<std::size_t>(v);
  };
  const auto real = [&](double& out) {
    if (!parse_double(value, out)) throw UsageError("hyperparameter " + std::string(key) + " needs a number");
  };
  if (key == "logreg.learning_rate") real(h.logreg.learning_rate);
  else if (key == "logreg.epochs") count(h.logreg.epochs);
  else if (key == "logreg.l2") real(h.logreg.l2);
  else if (key == "tree.max_depth") count(h.tree.max_depth);
  else if (key == "tree.min_samples_leaf") count(h.tree.min_samples_leaf);
  else if (key == "forest.tree_count") count(h.forest.tree_count);
  else if (key == "forest.max_depth") count(h.forest.max_depth);
  else if (key == "forest.min_samples_leaf") count(h.forest.min_samples_leaf);
  else if (key == "forest.max_features") count(h.forest.max_features);
  else if (key == "forest.bootstrap") {
    if (value != "0" && value != "1") throw UsageError("forest.bootstrap must be 0 or 1");
    h.forest.bootstrap = value == "1";
  } else if (key == "gbm.rounds") count(h.gbm.rounds);
  else if (key == "gbm.max_depth") count(h.gbm.max_depth);
  else if (key == "gbm.learning_rate") real(h.gbm.learning_rate);
  else if (key == "gbm.min_samples_leaf") count(h.gbm.min_samples_leaf);
  else if (key == "mlp.hidden1") count(h.mlp.hidden1);
  else if (key == "mlp.hidden2") count(h.mlp.hidden2);
  else if (key == "mlp.learning_rate") real(h.mlp.learning_rate);
  else if (key == "mlp.epochs") count(h.mlp.epochs);
  else if (key == "mlp.batch_size") count(h.mlp.batch_size);
  else throw UsageError("unknown hyperparameter '" + std::string(key) + "'");
  validate_hyperparams(h);
}

void validate_hyperparams(const Hyperparams& h) {
  const auto need = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("invalid hyperparameter: ") + what);
  };
  need(h.logreg.learning_rate > 0 && h.logreg.l2 >= 0, "logreg learning_rate > 0 and l2 >= 0");
  need(h.tree.max_depth >= 1 && h.tree.min_samples_leaf >= 1, "tree max_depth and min_samples_leaf >= 1");
  need(h.forest.tree_count >= 1 && h.forest.max_depth >= 1 && h.forest.min_samples_leaf >= 1,
       "forest tree_count, max_depth and min_samples_leaf >= 1");
  need(h.gbm.rounds >= 1 && h.gbm.max_depth >= 1 && h.gbm.learning_rate > 0 && h.gbm.min_samples_leaf >= 1,
       "gbm rounds, max_depth, min_samples_leaf >= 1 and learning_rate > 0");
  need(h.mlp.hidden1 >= 1 && h.mlp.hidden2 >= 1 && h.mlp.learning_rate > 0 && h.mlp.batch_size >= 1,
       "mlp layer sizes and batch_size >= 1 and learning_rate > 0");
}

Model train_model(ModelKind kind, const Dataset& train, const Hyperparams& hyper, std::uint64_t seed) {
  Model m;
  switch (kind) {
    case ModelKind::logreg: m = train_logreg(train, hyper.logreg); break;
    case ModelKind::tree: m = train_tree(train, hyper.tree); break;
    case ModelKind::forest: m = train_forest(train, hyper.forest, seed); break;
    case ModelKind::gbm: m = train_gbm(train, hyper.gbm); break;
    case ModelKind::mlp: m = train_mlp(train, hyper.mlp, seed); break;
  }
  m.meta.seed = seed;
  return m;
}

double predict_score(const Model& model, std::span<const double> raw) {
  if (raw.size() != model.feature_names.size()) {
    std::ostringstream msg;
    msg << "dimension mismatch: model expects " << model.feature_names.size() << " features, got " << raw.size();
    throw UsageError(msg.str());
  }
  std::vector<double> scaled;
  std::span<const double> x = raw;
  if (model.scaler) {
    scaled = apply_standardizer(*model.scaler, raw);
    x = scaled;
  }
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogRegParams>) {
          double z = p.bias;
          for (std::size_t j = 0; j < x.size(); ++j) z += p.weights[j] * x[j];
          return 1.0 / (1.0 + std::exp(-z));
        } else if constexpr (std::is_same_v<P, TreeEnsemble>) {
          double sum = 0.0;
          for (const auto& t : p.trees) sum += t.predict(x);
          return sum / static_cast<double>(p.trees.size());
        } else if constexpr (std::is_same_v<P, GbmParams>) {
          double f = p.base_score;
          for (const auto& t : p.trees) f += t.predict(x);
          return 1.0 / (1.0 + std::exp(-f));
        } else {
          return mlp_forward(p, x);
        }
      },
      model.params);
}

int predict_label(const Model& model, std::span<const double> raw, double threshold) {
  return predict_score(model, raw) >= threshold ? 1 : 0;
}

Metrics evaluate(const Model& model, const Dataset& test, double threshold) {
  if (test.rows.empty()) throw DataError("test set is empty");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& r : test.rows) {
    if (!r.label) throw DataError("evaluation rows must be labelled");
    const int pred = predict_label(model, r.values, threshold);
    const bool actual = *r.label == Label::miner;
    if (pred && actual) ++tp;
    else if (pred) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

}  // namespace gpusentinel

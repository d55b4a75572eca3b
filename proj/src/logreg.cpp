#include <cmath>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/error.hpp"
#include "tree_builder.hpp"

namespace gpusentinel {

// Full-batch gradient descent on mean logistic loss + (l2/2)|w|^2, starting
// from zero weights. The bias is not regularised.
Model train_logreg(const Dataset& train, const LogRegHyper& hyper, TrainingLog* log) {
  if (train.rows.empty()) throw DataError("training set is empty");
  if (!(hyper.learning_rate > 0.0) || hyper.l2 < 0.0) throw UsageError("invalid logistic regression hyperparameters");
  Model m;
  m.kind = ModelKind::logreg;
  m.feature_names = train.feature_names;
  m.hyper.logreg = hyper;
  m.meta.dataset_fingerprint = dataset_fingerprint(train);
  m.scaler = train.scaler ? *train.scaler : compute_scaler(train);

  const auto x = detail::to_matrix(train, &*m.scaler);
  const auto y = detail::to_targets(train);
  const std::size_t d = x.cols;
  const auto n = static_cast<double>(x.rows);

  LogRegParams p;
  p.weights.assign(d, 0.0);
  std::vector<double> gw(d);

  const auto loss_and_grad = [&](bool want_grad) {
    double loss = 0.0;
    double gb = 0.0;
    if (want_grad) std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = x.row(i);
      double z = p.bias;
      for (std::size_t j = 0; j < d; ++j) z += p.weights[j] * row[j];
      loss += std::max(z, 0.0) - z * y[i] + std::log1p(std::exp(-std::abs(z)));
      if (want_grad) {
        const double err = 1.0 / (1.0 + std::exp(-z)) - y[i];
        gb += err;
        for (std::size_t j = 0; j < d; ++j) gw[j] += err * row[j];
      }
    }
    double reg = 0.0;
    for (double w : p.weights) reg += w * w;
    loss = loss / n + 0.5 * hyper.l2 * reg;
    if (want_grad) {
      for (std::size_t j = 0; j < d; ++j) gw[j] = gw[j] / n + hyper.l2 * p.weights[j];
      gb /= n;
    }
    return std::pair{loss, gb};
  };

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto [loss, gb] = loss_and_grad(true);
    if (!std::isfinite(loss)) throw DataError("logistic regression loss diverged; use a smaller learning rate");
    if (log) log->loss.push_back(loss);
    for (std::size_t j = 0; j < d; ++j) p.weights[j] -= hyper.learning_rate * gw[j];
    p.bias -= hyper.learning_rate * gb;
  }
  const double final_loss = loss_and_grad(false).first;
  if (!std::isfinite(final_loss)) throw DataError("logistic regression loss diverged; use a smaller learning rate");
  if (log) log->loss.push_back(final_loss);

  m.params = std::move(p);
  return m;
}

}  // namespace gpusentinel

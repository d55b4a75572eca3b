#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/rng.hpp"
#include "tree_builder.hpp"

namespace gpusentinel {

std::size_t MlpParams::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
}

double& MlpParams::parameter(std::size_t index) {
  for (auto* v : {&w1, &b1, &w2, &b2, &w3}) {
    if (index < v->size()) return (*v)[index];
    index -= v->size();
  }
  if (index == 0) return b3;
  throw UsageError("mlp parameter index out of range");
}

MlpParams init_mlp(std::size_t inputs, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed) {
  if (inputs == 0 || hidden1 == 0 || hidden2 == 0) throw UsageError("mlp layer widths must be positive");
  MlpParams net;
  net.inputs = inputs;
  net.hidden1 = hidden1;
  net.hidden2 = hidden2;
  Rng rng(seed);
  const auto glorot = [&rng](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    w.resize(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-limit, limit);
  };
  glorot(net.w1, inputs, hidden1);
  glorot(net.w2, hidden1, hidden2);
  glorot(net.w3, hidden2, 1);
  net.b1.assign(hidden1, 0.0);
  net.b2.assign(hidden2, 0.0);
  net.b3 = 0.0;
  return net;
}

namespace {

struct Activations {
  std::vector<double> a1, a2;  // post-ReLU
  double logit = 0.0;
};

void forward(const MlpParams& net, std::span<const double> x, Activations& act) {
  act.a1.resize(net.hidden1);
  act.a2.resize(net.hidden2);
  for (std::size_t h = 0; h < net.hidden1; ++h) {
    double z = net.b1[h];
    const double* w = net.w1.data() + h * net.inputs;
    for (std::size_t j = 0; j < net.inputs; ++j) z += w[j] * x[j];
    act.a1[h] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t h = 0; h < net.hidden2; ++h) {
    double z = net.b2[h];
    const double* w = net.w2.data() + h * net.hidden1;
    for (std::size_t j = 0; j < net.hidden1; ++j) z += w[j] * act.a1[j];
    act.a2[h] = z > 0.0 ? z : 0.0;
  }
  double z = net.b3;
  for (std::size_t j = 0; j < net.hidden2; ++j) z += net.w3[j] * act.a2[j];
  act.logit = z;
}

MlpParams zeros_like(const MlpParams& net) {
  MlpParams g;
  g.inputs = net.inputs;
  g.hidden1 = net.hidden1;
  g.hidden2 = net.hidden2;
  g.w1.assign(net.w1.size(), 0.0);
  g.b1.assign(net.b1.size(), 0.0);
  g.w2.assign(net.w2.size(), 0.0);
  g.b2.assign(net.b2.size(), 0.0);
  g.w3.assign(net.w3.size(), 0.0);
  g.b3 = 0.0;
  return g;
}

}  // namespace

double mlp_forward(const MlpParams& net, std::span<const double> x) {
  if (x.size() != net.inputs) throw UsageError("mlp input dimension mismatch");
  Activations act;
  forward(net, x, act);
  return 1.0 / (1.0 + std::exp(-act.logit));
}

double mlp_loss_and_gradient(const MlpParams& net, std::span<const std::vector<double>> rows,
                             std::span<const double> targets, MlpParams* gradient) {
  if (rows.empty() || rows.size() != targets.size()) throw UsageError("mlp batch shape mismatch");
  if (gradient) *gradient = zeros_like(net);
  const auto n = static_cast<double>(rows.size());
  Activations act;
  std::vector<double> d2(net.hidden2), d1(net.hidden1);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& x = rows[r];
    forward(net, x, act);
    const double z = act.logit, y = targets[r];
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (!gradient) continue;

    const double dz3 = (1.0 / (1.0 + std::exp(-z)) - y) / n;
    MlpParams& g = *gradient;
    for (std::size_t j = 0; j < net.hidden2; ++j) {
      g.w3[j] += dz3 * act.a2[j];
      d2[j] = act.a2[j] > 0.0 ? dz3 * net.w3[j] : 0.0;
    }
    g.b3 += dz3;
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t h = 0; h < net.hidden2; ++h) {
      if (d2[h] == 0.0) continue;
      const double* w = net.w2.data() + h * net.hidden1;
      double* gw = g.w2.data() + h * net.hidden1;
      for (std::size_t j = 0; j < net.hidden1; ++j) {
        gw[j] += d2[h] * act.a1[j];
        d1[j] += d2[h] * w[j];
      }
      g.b2[h] += d2[h];
    }
    for (std::size_t h = 0; h < net.hidden1; ++h) {
      if (act.a1[h] <= 0.0) continue;
      double* gw = g.w1.data() + h * net.inputs;
      for (std::size_t j = 0; j < net.inputs; ++j) gw[j] += d1[h] * x[j];
      g.b1[h] += d1[h];
    }
  }
  return loss / n;
}

Model train_mlp(const Dataset& train, const MlpHyper& hyper, std::uint64_t seed, TrainingLog* log) {
  if (train.rows.empty()) throw DataError("training set is empty");
  if (!(hyper.learning_rate > 0.0) || hyper.batch_size == 0) throw UsageError("invalid mlp hyperparameters");
  Model m;
  m.kind = ModelKind::mlp;
  m.feature_names = train.feature_names;
  m.hyper.mlp = hyper;
  m.meta.seed = seed;
  m.meta.dataset_fingerprint = dataset_fingerprint(train);
  m.scaler = train.scaler ? *train.scaler : compute_scaler(train);

  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(train.rows.size());
  for (const auto& r : train.rows) {
    if (!r.label) throw DataError("training rows must be labelled");
    x.push_back(apply_standardizer(*m.scaler, r.values));
    y.push_back(*r.label == Label::miner ? 1.0 : 0.0);
  }

  MlpParams net = init_mlp(train.dimension(), hyper.hidden1, hyper.hidden2, seed);
  Rng order_rng(derive_seed(seed, 1));
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> bx;
  std::vector<double> by;
  MlpParams grad;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.below(i))]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t k = start; k < end; ++k) {
        bx.push_back(x[order[k]]);
        by.push_back(y[order[k]]);
      }
      const double loss = mlp_loss_and_gradient(net, bx, by, &grad);
      if (!std::isfinite(loss)) throw DataError("mlp loss diverged; use a smaller learning rate");
      epoch_loss += loss * static_cast<double>(end - start);
      for (std::size_t p = 0; p < net.parameter_count(); ++p)
        net.parameter(p) -= hyper.learning_rate * grad.parameter(p);
    }
    if (log) log->loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  m.params = std::move(net);
  return m;
}

}  // namespace gpusentinel

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gpusentinel/exec.hpp"
#include "gpusentinel/features.hpp"

namespace gpusentinel {

enum class ModelKind { logreg, tree, forest, gbm, mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // throws UsageError
// Row title used in metric tables.
std::string_view display_name(ModelKind kind);

struct LogRegHyper {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2 = 1e-4;
};

struct TreeHyper {
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 2;
};

struct ForestHyper {
  std::size_t tree_count = 50;
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0 means ceil(sqrt(d)), resolved at training time
  bool bootstrap = true;
};

struct GbmHyper {
  std::size_t rounds = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
};

struct MlpHyper {
  std::size_t hidden1 = 16;
  std::size_t hidden2 = 8;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
};

struct Hyperparams {
  LogRegHyper logreg;
  TreeHyper tree;
  ForestHyper forest;
  GbmHyper gbm;
  MlpHyper mlp;
};

// Sets one hyperparameter from "<kind>.<name>" (e.g. forest.tree_count).
// Throws UsageError for unknown keys or values out of range.
void set_hyperparameter(Hyperparams& hyper, std::string_view key, std::string_view value);
void validate_hyperparams(const Hyperparams& hyper);

// Binary decision tree; a node is a leaf when feature < 0. Rows go left when
// x[feature] <= threshold.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  bool operator==(const DecisionTree&) const = default;
};

struct LogRegParams {
  std::vector<double> weights;
  double bias = 0.0;
};

// tree (one tree) and forest (mean of leaf values).
struct TreeEnsemble {
  std::vector<DecisionTree> trees;
};

// Score = sigmoid(base_score + sum of tree outputs); leaf values already
// include the learning rate.
struct GbmParams {
  double base_score = 0.0;
  std::vector<DecisionTree> trees;
};

// d -> h1 -> h2 -> 1, ReLU hidden layers, sigmoid output. Matrices row-major
// with one row per output unit.
struct MlpParams {
  std::size_t inputs = 0;
  std::size_t hidden1 = 0;
  std::size_t hidden2 = 0;
  std::vector<double> w1, b1, w2, b2, w3;
  double b3 = 0.0;

  std::size_t parameter_count() const;
  // Flat view order: w1, b1, w2, b2, w3, b3.
  double& parameter(std::size_t index);
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::optional<WindowSpec> window;
};

struct Model {
  ModelKind kind = ModelKind::logreg;
  std::vector<std::string> feature_names;
  std::optional<Scaler> scaler;  // applied to raw vectors before the model
  Hyperparams hyper;
  TrainingMeta meta;
  std::variant<LogRegParams, TreeEnsemble, GbmParams, MlpParams> params;
};

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

// precision (recall) is 1 when its denominator is empty; f1 is 0 when
// precision + recall is 0.
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

// Optional per-epoch (or per-round) loss record.
struct TrainingLog {
  std::vector<double> loss;
};

// Stratified split; the test share of each class is allotted so the total
// matches round(fraction * n) and each class keeps at least one row on both
// sides. Rows keep their original relative order.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Scale-sensitive trainers use dataset.scaler when present, else fit one.
Model train_logreg(const Dataset& train, const LogRegHyper& hyper, TrainingLog* log = nullptr);
Model train_tree(const Dataset& train, const TreeHyper& hyper);
Model train_forest(const Dataset& train, const ForestHyper& hyper, std::uint64_t seed,
                   Exec exec = Exec::parallel);
Model train_gbm(const Dataset& train, const GbmHyper& hyper, TrainingLog* log = nullptr);
Model train_mlp(const Dataset& train, const MlpHyper& hyper, std::uint64_t seed, TrainingLog* log = nullptr);

Model train_model(ModelKind kind, const Dataset& train, const Hyperparams& hyper, std::uint64_t seed);

// Glorot-uniform weights, zero biases.
MlpParams init_mlp(std::size_t inputs, std::size_t hidden1, std::size_t hidden2, std::uint64_t seed);
double mlp_forward(const MlpParams& net, std::span<const double> x);  // probability
// Mean binary cross-entropy over the rows and its gradient (same layout as
// `net`). `rows` are already standardized.
double mlp_loss_and_gradient(const MlpParams& net, std::span<const std::vector<double>> rows,
                             std::span<const double> targets, MlpParams* gradient);

double predict_score(const Model& model, std::span<const double> raw);
int predict_label(const Model& model, std::span<const double> raw, double threshold = 0.5);

Metrics evaluate(const Model& model, const Dataset& test, double threshold = 0.5);

// Self-describing text: "GPUSENTINEL-MODEL v1", kind, hyperparams, meta,
// features, scaler and parameters. Numbers are shortest exact notation, so
// a reload predicts bit-identically.
inline constexpr std::string_view kModelHeader = "GPUSENTINEL-MODEL v1";
std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace gpusentinel

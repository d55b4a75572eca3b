#pragma once

// Internal CART builder shared by the tree, forest and boosting trainers.

#include <cstddef>
#include <span>
#include <vector>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/rng.hpp"

namespace gpusentinel::detail {

// Row-major design matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

Matrix to_matrix(const Dataset& dataset, const Scaler* scaler = nullptr);
std::vector<int> to_targets(const Dataset& dataset);

struct TreeBuildOptions {
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // features examined per split; 0 or >= cols means all
  Rng* rng = nullptr;            // required when subsampling features
};

// Gini splits; leaf value = fraction of class 1. `indices` may repeat rows
// (bootstrap draws).
DecisionTree build_classification_tree(const Matrix& x, std::span<const int> y,
                                       std::vector<std::size_t> indices, const TreeBuildOptions& options);

// Squared-error splits on `gradient`; leaf value = scale * sum(gradient) /
// sum(hessian), a single Newton step for logistic loss.
DecisionTree build_newton_tree(const Matrix& x, std::span<const double> gradient, std::span<const double> hessian,
                               double scale, const TreeBuildOptions& options);

}  // namespace gpusentinel::detail

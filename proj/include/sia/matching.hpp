// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "sia/data.hpp"
#include "sia/model.hpp"

namespace sia {

/// Dense row-major cost matrix; rows are predictions, columns ground truths.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct Assignment {
  /// (prediction, ground truth) pairs sorted by prediction index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;

  /// Ground-truth index matched to `prediction`, or -1.
  long gt_for(std::size_t prediction) const;
};

/// Entry (i,j) = lambda_actor * (-p_act_i) + lambda_box * (L1 + 1 - GIoU).
CostMatrix build_match_cost(std::span<const DetectionTriplet> triplets,
                            const KeyframeAnnotation& gt, double lambda_actor,
                            double lambda_box);

/// Minimum-cost injective assignment of size min(N, M). Among optimal
/// assignments the lexicographically smallest pair list is returned.
Assignment hungarian(const CostMatrix& cost);

/// Optimal total only, no tie-breaking. Exposed for tests.
double hungarian_optimal_cost(const CostMatrix& cost);

}  // namespace sia

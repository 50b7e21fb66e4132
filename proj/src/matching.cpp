// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sia/errors.hpp"

namespace sia {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ArgumentError("cost matrix value count does not match its shape");
  }
}

long Assignment::gt_for(std::size_t prediction) const {
  for (const auto& [p, g] : pairs) {
    if (p == prediction) return static_cast<long>(g);
  }
  return -1;
}

CostMatrix build_match_cost(std::span<const DetectionTriplet> triplets,
                            const KeyframeAnnotation& gt, double lambda_actor,
                            double lambda_box) {
  if (triplets.empty()) throw ArgumentError("build_match_cost: no predictions");
  CostMatrix cost(triplets.size(), gt.boxes.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const BoxCXCYWH& pred = triplets[i].box;
    const BoxXYXY pred_xyxy = to_xyxy(pred);
    for (std::size_t j = 0; j < gt.boxes.size(); ++j) {
      const BoxXYXY& target = gt.boxes[j];
      const double box_cost =
          l1_distance(pred, to_cxcywh(target)) + (1.0 - giou(pred_xyxy, target));
      cost(i, j) = lambda_actor * (-triplets[i].p_act) + lambda_box * box_cost;
    }
  }
  return cost;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path Hungarian method over an n x m matrix with n <= m.
// `blocked` entries are excluded. Returns the column for each row, or an empty
// vector when no complete assignment exists.
std::vector<std::size_t> solve_rows_le_cols(std::size_t n, std::size_t m,
                                            const std::vector<double>& c,
                                            const std::vector<char>& blocked) {
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const std::size_t idx = (i0 - 1) * m + (j - 1);
        if (!blocked[idx]) {
          const double cur = c[idx] - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0 || delta == kInf) return {};
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Optimal (prediction, gt) pairs on the sub-problem consisting of the given
// rows and columns of `cost`. Sums are accumulated in prediction order.
struct SubSolution {
  bool feasible = false;
  double total = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

SubSolution solve_subproblem(const CostMatrix& cost, const std::vector<std::size_t>& rows,
                             const std::vector<std::size_t>& cols) {
  SubSolution out;
  if (rows.empty() || cols.empty()) {
    out.feasible = true;
    return out;
  }
  const bool transpose = rows.size() > cols.size();
  const std::size_t n = transpose ? cols.size() : rows.size();
  const std::size_t m = transpose ? rows.size() : cols.size();
  std::vector<double> c(n * m);
  std::vector<char> blocked(n * m, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      c[a * m + b] = transpose ? cost(rows[b], cols[a]) : cost(rows[a], cols[b]);
    }
  }
  const auto sol = solve_rows_le_cols(n, m, c, blocked);
  if (sol.empty()) return out;
  out.feasible = true;
  for (std::size_t a = 0; a < n; ++a) {
    if (transpose) {
      out.pairs.emplace_back(rows[sol[a]], cols[a]);
    } else {
      out.pairs.emplace_back(rows[a], cols[sol[a]]);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const auto& [r, col] : out.pairs) out.total += cost(r, col);
  return out;
}

double pair_sum(const CostMatrix& cost,
                const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

}  // namespace

double hungarian_optimal_cost(const CostMatrix& cost) {
  std::vector<std::size_t> rows(cost.rows()), cols(cost.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  return solve_subproblem(cost, rows, cols).total;
}

Assignment hungarian(const CostMatrix& cost) {
  for (double v : cost.values()) {
    if (!std::isfinite(v)) throw ArgumentError("hungarian: non-finite cost entry");
  }
  Assignment result;
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const std::size_t k = std::min(n, m);
  if (k == 0) return result;

  std::vector<std::size_t> all_rows(n), all_cols(m);
  for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
  for (std::size_t j = 0; j < m; ++j) all_cols[j] = j;
  const SubSolution best = solve_subproblem(cost, all_rows, all_cols);
  const double optimum = best.total;

  double scale = 1.0;
  for (double v : cost.values()) scale += std::abs(v);
  const double tol = 1e-12 * scale;

  // Fix pairs greedily in lexicographic order, keeping only choices that
  // still admit an optimal completion.
  std::vector<std::pair<std::size_t, std::size_t>> fixed;
  std::vector<char> col_used(m, 0);
  double fixed_cost = 0.0;
  for (std::size_t i = 0; i < n && fixed.size() < k; ++i) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t r = i + 1; r < n; ++r) rest_rows.push_back(r);
    // Rows remaining after i must be able to fill the remaining slots.
    const std::size_t slots_after = k - fixed.size() - 1;
    bool placed = false;
    for (std::size_t j = 0; j < m && !placed; ++j) {
      if (col_used[j]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t c = 0; c < m; ++c) {
        if (!col_used[c] && c != j) rest_cols.push_back(c);
      }
      if (std::min(rest_rows.size(), rest_cols.size()) < slots_after) continue;
      const SubSolution sub = solve_subproblem(cost, rest_rows, rest_cols);
      if (!sub.feasible) continue;
      const double candidate = fixed_cost + cost(i, j) + sub.total;
      if (candidate <= optimum + tol) {
        fixed.emplace_back(i, j);
        col_used[j] = 1;
        fixed_cost += cost(i, j);
        placed = true;
      }
    }
    // Row i stays unmatched when no column keeps the assignment optimal.
  }
  if (fixed.size() != k) {
    // Numerical fallback: tolerance rejected every candidate.
    result.pairs = best.pairs;
  } else {
    result.pairs = std::move(fixed);
  }
  result.total_cost = pair_sum(cost, result.pairs);
  return result;
}

}  // namespace sia

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations shared by unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sia/eval.hpp"
#include "sia/geometry.hpp"
#include "sia/matching.hpp"

namespace sia::oracle {

struct BruteForceAssignment {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by prediction
};

/// Enumerates every injective mapping of size min(N, M). Among optima the
/// lexicographically smallest pair list wins.
inline BruteForceAssignment brute_force_assignment(const CostMatrix& c) {
  BruteForceAssignment best;
  const std::size_t n = c.rows(), m = c.cols();
  const std::size_t k = std::min(n, m);
  std::vector<std::pair<std::size_t, std::size_t>> cur;
  std::vector<bool> used_col(m, false);
  // Rows are chosen in increasing order; every size-k row subset is visited.
  auto rec = [&](auto&& self, std::size_t row, double acc) -> void {
    if (cur.size() == k) {
      if (acc < best.cost || (acc == best.cost && cur < best.pairs)) {
        best.cost = acc;
        best.pairs = cur;
      }
      return;
    }
    if (row >= n || n - row < k - cur.size()) return;
    for (std::size_t col = 0; col < m; ++col) {
      if (used_col[col]) continue;
      used_col[col] = true;
      cur.emplace_back(row, col);
      self(self, row + 1, acc + c(row, col));
      cur.pop_back();
      used_col[col] = false;
    }
    self(self, row + 1, acc);
  };
  if (k == 0) {
    best.cost = 0.0;
    return best;
  }
  rec(rec, 0, 0.0);
  return best;
}

/// Cell-center counts of a box on a G x G grid over the unit square.
inline double raster_area(const BoxXYXY& b, int g) {
  auto count = [g](double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const double first = std::ceil(lo * g - 0.5);
    const double last = std::floor(hi * g - 0.5);
    return std::max(0.0, last - first + 1.0);
  };
  return count(b.x1, b.x2) * count(b.y1, b.y2) / (static_cast<double>(g) * g);
}

inline BoxXYXY intersection_box(const BoxXYXY& a, const BoxXYXY& b) {
  return {std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2), std::min(a.y2, b.y2)};
}

inline double raster_iou(const BoxXYXY& a, const BoxXYXY& b, int g) {
  const double ia = raster_area(intersection_box(a, b), g);
  const double u = raster_area(a, g) + raster_area(b, g) - ia;
  return u > 0.0 ? ia / u : 0.0;
}

/// GIoU by enumerating cells of a fine grid inside the hull: cells covered by
/// either box form the union, cells covered by both the intersection.
inline double enumerated_giou(const BoxXYXY& a, const BoxXYXY& b, int g) {
  const BoxXYXY hull{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
  long in_a_or_b = 0, in_both = 0, in_hull = 0;
  auto inside = [](const BoxXYXY& r, double x, double y) { return x >= r.x1 && x <= r.x2 && y >= r.y1 && y <= r.y2; };
  for (int i = 0; i < g; ++i) {
    const double y = (i + 0.5) / g;
    for (int j = 0; j < g; ++j) {
      const double x = (j + 0.5) / g;
      if (!inside(hull, x, y)) continue;
      ++in_hull;
      const bool pa = inside(a, x, y), pb = inside(b, x, y);
      if (pa || pb) ++in_a_or_b;
      if (pa && pb) ++in_both;
    }
  }
  if (in_hull == 0 || in_a_or_b == 0) return 0.0;
  const double iou = static_cast<double>(in_both) / in_a_or_b;
  return iou - static_cast<double>(in_hull - in_a_or_b) / in_hull;
}

inline double plain_iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  return inter / (area_a + area_b - inter);
}

/// AP by explicit PR enumeration: label every detection TP/FP by the greedy
/// rule, list (recall, precision) after each rank, then add recall gains
/// weighted by the best precision at that rank or later.
inline std::optional<double> brute_force_ap(std::vector<ScoredBox> dets, const std::vector<GroundTruthBox>& gts,
                                            double thr) {
  if (gts.empty()) return std::nullopt;
  std::stable_sort(dets.begin(), dets.end(), [](const ScoredBox& a, const ScoredBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.clip_id != b.clip_id) return a.clip_id < b.clip_id;
    return a.box < b.box;
  });
  std::vector<bool> taken(gts.size(), false);
  std::vector<int> tp(dets.size(), 0);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    double best = -1.0;
    long best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].clip_id != dets[d].clip_id) continue;
      const double v = plain_iou(dets[d].box, gts[g].box);
      if (v >= thr && v > best) {
        best = v;
        best_g = static_cast<long>(g);
      }
    }
    if (best_g >= 0) {
      taken[static_cast<std::size_t>(best_g)] = true;
      tp[d] = 1;
    }
  }
  std::vector<double> recall, precision;
  double hits = 0.0;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    hits += tp[k];
    recall.push_back(hits / gts.size());
    precision.push_back(hits / static_cast<double>(k + 1));
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (!tp[k]) continue;
    double best_p = 0.0;
    for (std::size_t j = k; j < dets.size(); ++j) best_p = std::max(best_p, precision[j]);
    ap += (recall[k] - prev_recall) * best_p;
    prev_recall = recall[k];
  }
  return ap;
}

inline BoxXYXY random_box(std::mt19937_64& rng, double min_side = 0.02) {
  std::uniform_real_distribution<double> side(min_side, 1.0);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> px(0.0, 1.0 - w), py(0.0, 1.0 - h);
  const double x = px(rng), y = py(rng);
  return {x, y, x + w, y + h};
}

}  // namespace sia::oracle

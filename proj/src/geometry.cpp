// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sia {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double intersection_area(const BoxXYXY& a, const BoxXYXY& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace

double BoxXYXY::area() const {
  const double w = x2 - x1;
  const double h = y2 - y1;
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

bool BoxXYXY::valid() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in01(x1) && in01(y1) && in01(x2) && in01(y2) && x1 <= x2 && y1 <= y2;
}

BoxXYXY to_xyxy(const BoxCXCYWH& b) {
  return {clamp01(b.cx - 0.5 * b.w), clamp01(b.cy - 0.5 * b.h),
          clamp01(b.cx + 0.5 * b.w), clamp01(b.cy + 0.5 * b.h)};
}

BoxCXCYWH to_cxcywh(const BoxXYXY& b) {
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1};
}

double iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double inter = intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BoxXYXY& a, const BoxXYXY& b) {
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                      (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  if (hull <= 0.0) return 0.0;
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return iou(a, b) - std::max(0.0, hull - uni) / hull;
}

double l1_distance(const BoxCXCYWH& a, const BoxCXCYWH& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

}  // namespace sia

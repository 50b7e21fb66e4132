// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>

namespace sia {

/// Corner-form box in normalized frame coordinates.
struct BoxXYXY {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;
  /// x1 <= x2, y1 <= y2 and every coordinate in [0,1].
  bool valid() const;

  auto operator<=>(const BoxXYXY&) const = default;
};

/// Center/size box; the regression target parameterization.
struct BoxCXCYWH {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  auto operator<=>(const BoxCXCYWH&) const = default;
};

/// Converts to corner form, clamping every coordinate to [0,1].
BoxXYXY to_xyxy(const BoxCXCYWH& b);
BoxCXCYWH to_cxcywh(const BoxXYXY& b);

/// Intersection over union. Zero-area boxes give 0 against anything.
double iou(const BoxXYXY& a, const BoxXYXY& b);

/// Generalized IoU in [-1,1]: IoU minus the empty fraction of the enclosing
/// hull. Returns 0 when the hull itself has zero area.
double giou(const BoxXYXY& a, const BoxXYXY& b);

/// Sum of absolute coordinate differences in center/size form.
double l1_distance(const BoxCXCYWH& a, const BoxCXCYWH& b);

}  // namespace sia

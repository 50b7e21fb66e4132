// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sia/data.hpp"
#include "sia/geometry.hpp"
#include "sia/vocab.hpp"

namespace sia {

inline constexpr double kDefaultIouThreshold = 0.5;

struct DetectionRecord {
  std::string clip_id;
  BoxXYXY box;
  ActionId class_id = 0;
  double score = 0.0;

  bool operator==(const DetectionRecord&) const = default;
};

/// One detection of a single class.
struct ScoredBox {
  std::string clip_id;
  BoxXYXY box;
  double score = 0.0;
};

/// One ground-truth instance of a single class.
struct GroundTruthBox {
  std::string clip_id;
  BoxXYXY box;
};

/// All-point interpolated AP with greedy per-keyframe matching in descending
/// score order. Returns nullopt when there is no ground truth.
std::optional<double> average_precision(std::span<const ScoredBox> detections,
                                        std::span<const GroundTruthBox> ground_truth,
                                        double iou_threshold = kDefaultIouThreshold);

struct ClassResult {
  ActionId class_id = 0;
  std::string name;
  std::size_t gt_count = 0;
  std::size_t detection_count = 0;
  std::optional<double> ap;
};

struct EvalReport {
  double iou_threshold = kDefaultIouThreshold;
  /// Unweighted mean over classes with at least one ground-truth instance.
  double mean_ap = 0.0;
  std::vector<ClassResult> per_class;

  nlohmann::ordered_json to_json() const;
};

/// Frame-level mAP: multi-label ground truth is expanded to one instance per
/// (box, label). Throws ValidationError on unknown classes or clips.
EvalReport evaluate(std::span<const DetectionRecord> detections,
                    std::span<const KeyframeAnnotation> ground_truth,
                    const ActionVocabulary& vocab, double iou_threshold = kDefaultIouThreshold);

/// `clip_id,x1,y1,x2,y2,class_id,score` per line.
std::string write_detection_csv(std::span<const DetectionRecord> detections);
std::vector<DetectionRecord> parse_detection_csv(std::string_view text);

}  // namespace sia

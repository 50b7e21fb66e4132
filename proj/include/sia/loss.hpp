// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "sia/autodiff.hpp"
#include "sia/data.hpp"
#include "sia/matching.hpp"
#include "sia/model.hpp"

namespace sia {

struct LossWeights {
  double actor = 2.0;
  double box = 2.0;
  double action = 2.0;
  /// Weight of background (unmatched) predictions in the actor term.
  double background_weight = 0.1;
};

struct LossBreakdown {
  double actor_term = 0.0;
  double box_term = 0.0;
  double action_term = 0.0;
  double total = 0.0;
};

struct LossGraph {
  ad::Var actor;
  ad::Var box;
  ad::Var action;
  ad::Var total;

  LossBreakdown values() const;
};

/// Weighted two-class cross-entropy over all predictions: matched rows are
/// actors, the rest background with weight `background_weight`; normalized
/// by the total weight.
ad::Var actor_cross_entropy(const ad::Var& actor_logits, const Assignment& assignment,
                            double background_weight);

/// Mean over matched pairs of L1 (center/size) + (1 - GIoU).
ad::Var matched_box_loss(const ad::Var& boxes, const std::vector<BoxXYXY>& targets,
                         const Assignment& assignment);

/// Mean binary cross-entropy over matched pairs x `classes`. Row k of
/// `matched_logits` belongs to assignment pair k.
ad::Var matched_action_bce(const ad::Var& matched_logits, const std::vector<ActionSet>& targets,
                           std::span<const ActionId> classes, const Assignment& assignment);

/// Full objective on differentiable detector outputs. `matched_logits` holds
/// logit_scale * cosine similarity for the matched predictions (pair order)
/// against `classes`. `targets` are the training label sets per gt box.
LossGraph compute_loss_graph(const VideoOutputs& outputs, const ad::Var& matched_logits,
                             const std::vector<BoxXYXY>& gt_boxes,
                             const std::vector<ActionSet>& targets,
                             std::span<const ActionId> classes, const Assignment& assignment,
                             const LossWeights& weights);

/// Value-level objective. `action_logits` is N x |classes|, raw (pre-sigmoid).
LossBreakdown compute_loss(std::span<const DetectionTriplet> triplets,
                           const Eigen::MatrixXd& action_logits, const KeyframeAnnotation& gt,
                           std::span<const ActionId> classes, const Assignment& assignment,
                           const LossWeights& weights);

/// Verifies assignment indices against the problem size; throws ContractError.
void check_assignment(const Assignment& assignment, std::size_t predictions, std::size_t targets);

}  // namespace sia

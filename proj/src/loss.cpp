// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sia/errors.hpp"

namespace sia {
namespace {

using ad::Matrix;
using ad::Var;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double logistic(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

struct BoxLossTerm {
  double value = 0.0;
  double grad[4] = {0, 0, 0, 0};  // d/d(cx, cy, w, h)
};

// L1 + 1 - GIoU for a predicted center/size box against a corner target,
// with the gradient w.r.t. the prediction.
BoxLossTerm box_term(const double* p, const BoxXYXY& t) {
  BoxLossTerm out;
  const BoxCXCYWH tc = to_cxcywh(t);
  const double target[4] = {tc.cx, tc.cy, tc.w, tc.h};
  for (int k = 0; k < 4; ++k) {
    const double d = p[k] - target[k];
    out.value += std::abs(d);
    out.grad[k] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }

  const double px1 = p[0] - 0.5 * p[2], px2 = p[0] + 0.5 * p[2];
  const double py1 = p[1] - 0.5 * p[3], py2 = p[1] + 0.5 * p[3];
  const double iw = std::min(px2, t.x2) - std::max(px1, t.x1);
  const double ih = std::min(py2, t.y2) - std::max(py1, t.y1);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double area_p = (px2 - px1) * (py2 - py1);
  const double area_t = (t.x2 - t.x1) * (t.y2 - t.y1);
  const double uni = area_p + area_t - inter;
  const double cw = std::max(px2, t.x2) - std::min(px1, t.x1);
  const double ch = std::max(py2, t.y2) - std::min(py1, t.y1);
  const double hull = cw * ch;
  if (uni <= 0.0 || hull <= 0.0) {
    out.value += 1.0;
    return out;
  }
  // 1 - GIoU = 2 - I/U - U/C
  out.value += 2.0 - inter / uni - uni / hull;

  // Partial derivatives w.r.t. the corners x1, x2, y1, y2.
  double d_inter[4] = {0, 0, 0, 0};
  if (overlap) {
    d_inter[0] = px1 > t.x1 ? -ih : 0.0;
    d_inter[1] = px2 < t.x2 ? ih : 0.0;
    d_inter[2] = py1 > t.y1 ? -iw : 0.0;
    d_inter[3] = py2 < t.y2 ? iw : 0.0;
  }
  const double pw = px2 - px1, ph = py2 - py1;
  const double d_area[4] = {-ph, ph, -pw, pw};
  const double d_hull[4] = {px1 < t.x1 ? -ch : 0.0, px2 > t.x2 ? ch : 0.0,
                            py1 < t.y1 ? -cw : 0.0, py2 > t.y2 ? cw : 0.0};
  double d_corner[4];
  for (int k = 0; k < 4; ++k) {
    const double d_uni = d_area[k] - d_inter[k];
    const double d_iou = (d_inter[k] * uni - inter * d_uni) / (uni * uni);
    const double d_ratio = (d_uni * hull - uni * d_hull[k]) / (hull * hull);
    d_corner[k] = -d_iou - d_ratio;
  }
  out.grad[0] += d_corner[0] + d_corner[1];
  out.grad[2] += 0.5 * (d_corner[1] - d_corner[0]);
  out.grad[1] += d_corner[2] + d_corner[3];
  out.grad[3] += 0.5 * (d_corner[3] - d_corner[2]);
  return out;
}

}  // namespace

LossBreakdown LossGraph::values() const {
  return {actor.item(), box.item(), action.item(), total.item()};
}

void check_assignment(const Assignment& assignment, std::size_t predictions, std::size_t targets) {
  std::vector<char> pred_used(predictions, 0), gt_used(targets, 0);
  for (const auto& [p, g] : assignment.pairs) {
    if (p >= predictions || g >= targets) {
      throw ContractError("assignment pair (" + std::to_string(p) + "," + std::to_string(g) +
                          ") out of range for " + std::to_string(predictions) + " predictions and " +
                          std::to_string(targets) + " ground truths");
    }
    if (pred_used[p]++ || gt_used[g]++) throw ContractError("assignment is not injective");
  }
}

Var actor_cross_entropy(const Var& actor_logits, const Assignment& assignment,
                        double background_weight) {
  const Matrix& z = actor_logits.value();
  const Eigen::Index n = z.rows();
  std::vector<char> matched(static_cast<std::size_t>(n), 0);
  for (const auto& pr : assignment.pairs) matched[pr.first] = 1;

  Matrix probs(n, 2);
  double loss = 0.0, total_weight = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = std::max(z(i, 0), z(i, 1));
    const double lse = m + std::log(std::exp(z(i, 0) - m) + std::exp(z(i, 1) - m));
    probs(i, 0) = std::exp(z(i, 0) - lse);
    probs(i, 1) = std::exp(z(i, 1) - lse);
    const bool actor = matched[static_cast<std::size_t>(i)] != 0;
    const double w = actor ? 1.0 : background_weight;
    loss += w * (lse - z(i, actor ? 0 : 1));
    total_weight += w;
  }
  if (total_weight <= 0.0) return ad::constant(Matrix::Zero(1, 1));
  loss /= total_weight;
  return ad::make_op(Matrix::Constant(1, 1, loss), {actor_logits},
                     [probs, matched, background_weight, total_weight](ad::Node& self) {
                       const double g = self.grad(0, 0) / total_weight;
                       Matrix d = probs;
                       for (Eigen::Index i = 0; i < d.rows(); ++i) {
                         const bool actor = matched[static_cast<std::size_t>(i)] != 0;
                         d(i, actor ? 0 : 1) -= 1.0;
                         d.row(i) *= g * (actor ? 1.0 : background_weight);
                       }
                       self.inputs[0]->accumulate(d);
                     });
}

Var matched_box_loss(const Var& boxes, const std::vector<BoxXYXY>& targets,
                     const Assignment& assignment) {
  if (assignment.pairs.empty()) return ad::constant(Matrix::Zero(1, 1));
  const Matrix& b = boxes.value();
  const double inv = 1.0 / static_cast<double>(assignment.pairs.size());
  Matrix d = Matrix::Zero(b.rows(), 4);
  double loss = 0.0;
  for (const auto& [p, g] : assignment.pairs) {
    const double pred[4] = {b(static_cast<Eigen::Index>(p), 0), b(static_cast<Eigen::Index>(p), 1),
                            b(static_cast<Eigen::Index>(p), 2), b(static_cast<Eigen::Index>(p), 3)};
    const BoxLossTerm term = box_term(pred, targets[g]);
    loss += term.value;
    for (int k = 0; k < 4; ++k) d(static_cast<Eigen::Index>(p), k) = term.grad[k] * inv;
  }
  return ad::make_op(Matrix::Constant(1, 1, loss * inv), {boxes}, [d](ad::Node& self) {
    self.inputs[0]->accumulate(d * self.grad(0, 0));
  });
}

Var matched_action_bce(const Var& matched_logits, const std::vector<ActionSet>& targets,
                       std::span<const ActionId> classes, const Assignment& assignment) {
  if (assignment.pairs.empty() || classes.empty()) return ad::constant(Matrix::Zero(1, 1));
  const Matrix& z = matched_logits.value();
  if (z.rows() != static_cast<Eigen::Index>(assignment.pairs.size()) ||
      z.cols() != static_cast<Eigen::Index>(classes.size())) {
    throw ContractError("matched_action_bce: logits shape does not match pairs x classes");
  }
  const double inv = 1.0 / static_cast<double>(z.size());
  Matrix d(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    const ActionSet& positives = targets[assignment.pairs[static_cast<std::size_t>(k)].second];
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double y = positives.count(classes[static_cast<std::size_t>(c)]) ? 1.0 : 0.0;
      const double v = z(k, c);
      loss += softplus(v) - v * y;
      d(k, c) = (logistic(v) - y) * inv;
    }
  }
  return ad::make_op(Matrix::Constant(1, 1, loss * inv), {matched_logits}, [d](ad::Node& self) {
    self.inputs[0]->accumulate(d * self.grad(0, 0));
  });
}

LossGraph compute_loss_graph(const VideoOutputs& outputs, const Var& matched_logits,
                             const std::vector<BoxXYXY>& gt_boxes,
                             const std::vector<ActionSet>& targets,
                             std::span<const ActionId> classes, const Assignment& assignment,
                             const LossWeights& weights) {
  if (gt_boxes.size() != targets.size()) throw ContractError("gt boxes and targets differ in length");
  check_assignment(assignment, outputs.size(), gt_boxes.size());
  LossGraph g;
  g.actor = actor_cross_entropy(outputs.actor_logits, assignment, weights.background_weight);
  g.box = matched_box_loss(outputs.boxes, gt_boxes, assignment);
  g.action = matched_action_bce(matched_logits, targets, classes, assignment);
  g.total = ad::add(ad::add(ad::scale(g.actor, weights.actor), ad::scale(g.box, weights.box)),
                    ad::scale(g.action, weights.action));
  return g;
}

LossBreakdown compute_loss(std::span<const DetectionTriplet> triplets,
                           const Eigen::MatrixXd& action_logits, const KeyframeAnnotation& gt,
                           std::span<const ActionId> classes, const Assignment& assignment,
                           const LossWeights& weights) {
  const auto n = static_cast<Eigen::Index>(triplets.size());
  check_assignment(assignment, triplets.size(), gt.boxes.size());
  if (action_logits.rows() != n || action_logits.cols() != static_cast<Eigen::Index>(classes.size())) {
    throw ContractError("compute_loss: action logits must be predictions x classes");
  }
  constexpr double kFloor = 1e-300;
  Matrix boxes(n, 4), actor(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = triplets[static_cast<std::size_t>(i)];
    boxes.row(i) << t.box.cx, t.box.cy, t.box.w, t.box.h;
    actor(i, 0) = std::log(std::max(t.p_act, kFloor));
    actor(i, 1) = std::log(std::max(1.0 - t.p_act, kFloor));
  }
  Matrix matched(static_cast<Eigen::Index>(assignment.pairs.size()), action_logits.cols());
  for (std::size_t k = 0; k < assignment.pairs.size(); ++k) {
    matched.row(static_cast<Eigen::Index>(k)) =
        action_logits.row(static_cast<Eigen::Index>(assignment.pairs[k].first));
  }
  VideoOutputs outputs{ad::constant(boxes), ad::constant(actor), ad::constant(Matrix::Zero(n, 1))};
  return compute_loss_graph(outputs, ad::constant(matched), gt.boxes, gt.action_sets, classes,
                            assignment, weights)
      .values();
}

}  // namespace sia

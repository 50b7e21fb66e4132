// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sia/loss.hpp"
#include "sia/matching.hpp"
#include "sia/model.hpp"
#include "sia/synthetic.hpp"

namespace sia::test {

/// Small synthetic sample with its vocabulary.
struct ToySample {
  ActionVocabulary vocab;
  Clip clip;
  KeyframeAnnotation annotation;
};

inline ToySample toy_sample(std::uint64_t seed, int min_actors = 2) {
  SynthConfig cfg;
  cfg.min_actors = min_actors;
  auto ds = generate_synthetic(seed, 1, cfg);
  return {ds.vocab, ds.clips[0], ds.manifest.entries[0].annotation};
}

inline std::vector<ActionId> present_classes(const KeyframeAnnotation& ann) {
  ActionSet all;
  for (const auto& s : ann.action_sets) all.insert(s.begin(), s.end());
  return {all.begin(), all.end()};
}

/// Builds the training objective for one clip with a fixed matching, so that
/// the closure is smooth in the parameters.
inline std::function<ad::Var()> toy_loss(const SiaModel& model, const ToySample& sample,
                                         const LossWeights& weights = {}) {
  const auto classes = present_classes(sample.annotation);
  const auto triplets = model.encode_video(sample.clip);
  const Assignment assignment =
      hungarian(build_match_cost(triplets, sample.annotation, weights.actor, weights.box));
  return [&model, sample, classes, assignment, weights]() {
    const VideoOutputs out = model.forward_video(sample.clip);
    std::vector<ad::Var> rows;
    for (ActionId c : classes) rows.push_back(model.forward_text(class_name_prompt(sample.vocab.name_of(c))));
    const ad::Var text = ad::concat_rows(rows);
    std::vector<Eigen::Index> preds;
    for (const auto& [p, g] : assignment.pairs) preds.push_back(static_cast<Eigen::Index>(p));
    const ad::Var logits =
        ad::scale_by(ad::matmul_nt(ad::gather_rows(out.embeddings, preds), text), model.logit_scale());
    return compute_loss_graph(out, logits, sample.annotation.boxes, sample.annotation.action_sets, classes,
                              assignment, weights)
        .total;
  };
}

}  // namespace sia::test

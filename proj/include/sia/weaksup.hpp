// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sia/data.hpp"
#include "sia/model.hpp"
#include "sia/vocab.hpp"

namespace sia {

enum class WeakSupMode { kNws, kAws };
std::string to_string(WeakSupMode mode);
WeakSupMode parse_weaksup_mode(const std::string& s);

/// Labels appended to the boxes of one global-label clip.
struct PseudolabelRecord {
  std::string clip_id;
  WeakSupMode method = WeakSupMode::kNws;
  std::vector<ActionSet> original;
  /// Parallel to the boxes; each set is empty or {global action}.
  std::vector<ActionSet> appended;
  /// AWS only: mean descriptor similarity of each matched box to the global
  /// action; empty optional for unmatched boxes.
  std::vector<std::optional<double>> similarity;
  /// Non-empty when the clip was skipped or produced nothing.
  std::string warning;

  std::size_t assigned_count() const;
  /// original united with appended, per box.
  std::vector<ActionSet> expanded() const;
  nlohmann::ordered_json to_json() const;
  static PseudolabelRecord from_json(const nlohmann::json& doc);
  bool operator==(const PseudolabelRecord&) const = default;
};

/// Appends the global action to every box.
PseudolabelRecord nws_expand(const KeyframeAnnotation& ann);

struct AwsOptions {
  std::size_t top_k = 1;
  /// Optional gate: boxes whose similarity is below it are not assigned.
  std::optional<double> min_similarity;
  double lambda_actor = 2.0;
  double lambda_box = 2.0;
};

/// Hungarian-matches predictions to ground-truth boxes and appends the
/// global action to the `top_k` matched boxes whose embeddings are most
/// similar to the global action's descriptors (ties by lower box index).
/// `bank` must have cached embeddings.
PseudolabelRecord aws_assign(const KeyframeAnnotation& ann,
                             std::span<const DetectionTriplet> triplets,
                             const DescriptorBank& bank, const AwsOptions& options = {});

using ClipLoader = std::function<Clip(const ManifestEntry&)>;

struct RefinementOptions {
  WeakSupMode mode = WeakSupMode::kNws;
  AwsOptions aws;
  /// Append-only JSON-lines record log. Records already present are reused,
  /// which makes an interrupted run resumable. Empty disables the log.
  std::string log_path;
  /// Recorded in the manifest provenance.
  std::string checkpoint_id;
};

struct RefinementResult {
  DatasetManifest manifest;
  std::vector<PseudolabelRecord> records;
};

/// Refines every global-label entry; other entries pass through untouched.
/// AWS mode requires `model` and a clip loader; NWS never touches either.
RefinementResult run_refinement(const DatasetManifest& manifest, const SiaModel* model,
                                DescriptorBank* bank, const ClipLoader& load_clip,
                                const RefinementOptions& options);

}  // namespace sia

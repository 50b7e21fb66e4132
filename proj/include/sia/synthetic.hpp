// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sia/data.hpp"
#include "sia/vocab.hpp"

namespace sia {

struct SynthColor {
  std::string name;
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
};

enum class Direction { kLeft, kRight, kUp, kDown };

/// Moving colored rectangles on a noise background. The fine action class of
/// a rectangle is (color, direction); optional coarse classes depend only on
/// the direction.
struct SynthConfig {
  int frames = 4;
  int height = 32;
  int width = 32;
  int min_actors = 1;
  int max_actors = 3;
  std::vector<SynthColor> colors = {{"red", 0.95f, 0.15f, 0.15f},
                                    {"green", 0.15f, 0.95f, 0.15f},
                                    {"blue", 0.15f, 0.15f, 0.95f}};
  std::vector<Direction> directions = {Direction::kLeft, Direction::kRight, Direction::kUp,
                                       Direction::kDown};
  bool coarse_labels = true;
  /// Fraction of clips that behave like a global-label source: exactly one
  /// rectangle performs the clip's global action, and boxes are annotated
  /// with coarse labels only.
  double global_fraction = 0.0;
  int min_size = 7;
  int max_size = 11;
  int speed = 2;  // pixels per frame
  float noise = 0.35f;
  std::string clip_prefix = "synth";

  /// Throws ConfigError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SynthConfig from_json(const nlohmann::json& doc);
};

struct SyntheticActor {
  int color = 0;
  Direction direction = Direction::kLeft;
  /// Pixel rectangle on the keyframe: [x, x + w) x [y, y + h).
  int x = 0, y = 0, w = 0, h = 0;
};

struct SyntheticDataset {
  ActionVocabulary vocab;
  DatasetManifest manifest;
  std::vector<Clip> clips;
  std::vector<std::vector<SyntheticActor>> actors;
  /// Index of the box performing the global action, -1 for ordinary clips.
  std::vector<int> performer;
};

std::string direction_name(Direction d);
/// Fine classes (color-major) followed by coarse per-direction classes.
ActionVocabulary synthetic_vocabulary(const SynthConfig& config);
ActionId fine_class(const SynthConfig& config, int color, Direction d);
ActionId coarse_class(const SynthConfig& config, Direction d);

/// Deterministic in (seed, n_clips, config).
SyntheticDataset generate_synthetic(std::uint64_t seed, int n_clips, const SynthConfig& config);

/// `per_class` templated descriptors for every synthetic class.
DescriptorBank synthetic_descriptor_bank(const SynthConfig& config, std::size_t per_class = 16);

}  // namespace sia

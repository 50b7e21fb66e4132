// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sia/autodiff.hpp"
#include "sia/data.hpp"
#include "sia/geometry.hpp"
#include "sia/vocab.hpp"

namespace sia {

/// DET: learned detection tokens are regressed. PATCH: temporally pooled
/// patch tokens are regressed, one detection per spatial position.
enum class RegressionMode { kDet, kPatch };

/// How the text tower reduces its token sequence to one vector: the mean over
/// all positions, or the last position.
enum class TextPooling { kMean, kLast };

struct ModelConfig {
  int image_size = 32;
  int patch_size = 8;
  int frames = 4;
  int video_layers = 2;
  int video_width = 64;
  int video_heads = 2;
  int text_layers = 2;
  int text_width = 64;
  int text_heads = 2;
  int text_context = 64;
  TextPooling text_pooling = TextPooling::kMean;
  int mlp_ratio = 4;
  int n_det_tokens = 100;
  int embed_dim = 32;
  RegressionMode mode = RegressionMode::kDet;
  int lora_rank = 4;
  double lora_alpha = 4.0;
  bool text_frozen = false;
  double logit_scale_init = 100.0;
  double logit_scale_min = 1.0;
  double logit_scale_max = 100.0;
  /// Adds a learned positional embedding to DET tokens. Off by default.
  bool det_positional_embedding = false;
  /// Std of trainable weights and DET tokens; 1/sqrt(video_width) for the toy.
  double init_std = 0.125;
  std::uint64_t init_seed = 0;

  /// Throws ConfigError.
  void validate() const;
  int grid_size() const { return image_size / patch_size; }
  int patches_per_frame() const { return grid_size() * grid_size(); }
  /// Number of triplets produced per clip.
  int num_outputs() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);
  /// FNV-1a of the canonical JSON text.
  std::uint64_t hash() const;

  /// 2 video layers, width 64, 2 heads, patch 8, 32x32 frames, T=4.
  static ModelConfig toy();
  /// ViT-B/16 sized video and text towers (8 frames at 224x224).
  static ModelConfig base16();
};

/// Per-token detector output: box, actor probability, unit vision embedding.
struct DetectionTriplet {
  BoxCXCYWH box;
  double p_act = 0.0;
  Eigen::VectorXd embedding;
};

/// Differentiable form of the detector outputs for one clip.
struct VideoOutputs {
  ad::Var boxes;         // N x 4, sigmoid cxcywh
  ad::Var actor_logits;  // N x 2, column 0 = actor, 1 = background
  ad::Var embeddings;    // N x d_t, unit rows

  std::size_t size() const { return static_cast<std::size_t>(boxes.rows()); }
  std::vector<DetectionTriplet> triplets() const;
};

/// Additive low-rank correction: y += (alpha / r) * B * A * x.
struct LowRankAdapter {
  ad::Var down;  // A, r x d_in
  ad::Var up;    // B, d_out x r, zero at initialization
  double scale = 1.0;
};

class SiaModel {
 public:
  explicit SiaModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  /// Throws ConfigError when the clip does not match the configured shape.
  VideoOutputs forward_video(const Clip& clip) const;
  /// 1 x d_t unit row. With `use_adapters` false the adapter branches are
  /// skipped entirely, giving the frozen base encoder.
  ad::Var forward_text(const std::string& text, bool use_adapters = true) const;

  std::vector<DetectionTriplet> encode_video(const Clip& clip) const;
  Eigen::VectorXd encode_text(const std::string& text) const;
  Eigen::VectorXd encode_text_base(const std::string& text) const;

  const ad::Var& logit_scale() const { return logit_scale_; }
  /// Restores the logit scale into its configured range.
  void clamp_logit_scale();
  /// Hash of the text-tower weights; keys descriptor embedding caches.
  std::uint64_t text_weights_version() const;
  std::vector<LowRankAdapter>& adapters() { return adapters_; }

 private:
  struct Linear {
    ad::Var weight;  // in x out
    ad::Var bias;    // 1 x out
  };
  struct Block {
    ad::Var ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    Linear qkv, out, fc1, fc2;
    int fc1_adapter = -1;
    int fc2_adapter = -1;
  };

  Linear make_linear(const std::string& prefix, int in, int out, bool trainable, double std);
  Block make_block(const std::string& prefix, int width, bool trainable, bool with_adapters);
  ad::Var apply_linear(const Linear& l, const ad::Var& x) const;
  ad::Var apply_block(const Block& b, const ad::Var& x, int heads, bool causal,
                      bool use_adapters) const;
  ad::Var adapted(const Linear& l, int adapter, const ad::Var& x, bool use_adapters) const;
  Eigen::MatrixXd normal(int rows, int cols, double std);

  ModelConfig config_;
  ad::ParameterSet params_;
  std::mt19937_64 init_rng_;

  Linear patch_embed_;
  ad::Var pos_spatial_, pos_temporal_, det_tokens_, det_pos_;
  std::vector<Block> video_blocks_;
  ad::Var video_ln_gamma_, video_ln_beta_;
  Linear box_fc0_, box_fc1_, box_fc2_, actor_head_, embed_head_;

  ad::Var token_embed_, text_pos_;
  std::vector<Block> text_blocks_;
  std::vector<LowRankAdapter> adapters_;
  ad::Var text_ln_gamma_, text_ln_beta_, text_proj_;
  ad::Var logit_scale_;
};

std::vector<DetectionTriplet> encode_video(const Clip& clip, const SiaModel& model);
Eigen::VectorXd encode_text(const std::string& text, const SiaModel& model);

/// Detection surviving the actor threshold, with one score per class.
struct ScoredDetection {
  std::size_t token = 0;
  BoxCXCYWH box;
  double p_act = 0.0;
  std::vector<double> scores;  // p_act * sigmoid(logit_scale * mean similarity)
};

std::vector<ScoredDetection> score_actions(std::span<const DetectionTriplet> triplets,
                                           const DescriptorBank& bank,
                                           double p_act_threshold, double logit_scale);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
};

struct GradientCheckOptions {
  std::size_t samples = 200;
  double step = 1e-4;
  std::uint64_t seed = 7;
  /// |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double denominator_floor = 1e-6;
};

/// Compares analytic gradients of `loss` against central differences for a
/// random subset of trainable scalars of `params`.
GradientCheckResult gradient_check(ad::ParameterSet& params,
                                   const std::function<ad::Var()>& loss,
                                   const GradientCheckOptions& options = {});

}  // namespace sia

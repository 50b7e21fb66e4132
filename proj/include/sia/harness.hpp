// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sia/data.hpp"
#include "sia/eval.hpp"
#include "sia/loss.hpp"
#include "sia/model.hpp"
#include "sia/synthetic.hpp"
#include "sia/vocab.hpp"
#include "sia/weaksup.hpp"

namespace sia {

inline constexpr int kRunConfigVersion = 1;

struct DataConfig {
  /// Manifest path; ignored when `synthetic` is set.
  std::string manifest;
  /// Generate the training set in memory instead of reading a manifest.
  std::optional<SynthConfig> synthetic;
  std::uint64_t synthetic_seed = 0;
  int synthetic_clips = 8;
  /// Sampling; `frames` must equal model.frames.
  int frames = 8;
  int stride = 4;
  bool class_balanced = false;
  /// Class names removed from training labels.
  std::vector<std::string> blocklist;
};

struct OptimConfig {
  double learning_rate = 1e-4;
  int steps = 1000;
  int batch_size = 8;
  /// Seeds batch sampling, descriptor draws, and model initialization.
  std::uint64_t seed = 0;
  bool cosine_decay = true;
  double grad_clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct VocabConfig {
  /// Descriptor bank file; empty uses class names.
  std::string bank;
  /// Sample one descriptor per class and step. Off: class-name prompts.
  bool augment = true;
};

struct EvalConfig {
  double iou_threshold = kDefaultIouThreshold;
  double p_act_threshold = 0.5;
  /// Evaluate on the training set every this many steps (0 disables).
  int every = 0;
  /// Stop once training-set mAP reaches this value.
  std::optional<double> stop_at_map;
};

/// Negative classes of the action term: those present in the batch, or the
/// whole vocabulary.
enum class NegativeClasses { kBatch, kVocabulary };

struct RunConfig {
  int version = kRunConfigVersion;
  ModelConfig model;
  DataConfig data;
  LossWeights loss;
  NegativeClasses negatives = NegativeClasses::kBatch;
  OptimConfig optim;
  VocabConfig vocab;
  EvalConfig eval;
  /// Checkpoint, metrics log, and state files go here; empty writes nothing.
  std::string output_dir;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);
};

/// Clips with their annotations, loaded and ready for the model.
struct LoadedDataset {
  ActionVocabulary vocab;
  std::vector<std::string> clip_ids;
  std::vector<Clip> clips;
  std::vector<KeyframeAnnotation> annotations;
  /// Training view: original plus pseudo labels per box.
  std::vector<KeyframeAnnotation> targets;

  std::size_t size() const { return clips.size(); }
};

/// Loads and samples the frames of a manifest entry.
ClipLoader manifest_clip_loader(const std::string& manifest_path, int frames, int stride);

/// Writes clips/*.f32, vocab.json, bank.json, manifest.json and a toy
/// train.json into `dir`.
void write_synthetic_dataset(const std::string& dir, const SyntheticDataset& ds,
                             const SynthConfig& config);

LoadedDataset load_dataset(const std::string& manifest_path, int frames, int stride);
LoadedDataset dataset_from_synthetic(const SyntheticDataset& synth);
/// Training data of `config` (synthetic or manifest), blocklist applied.
LoadedDataset load_training_data(const RunConfig& config);

struct StepMetrics {
  int step = 0;
  double learning_rate = 0.0;
  double grad_norm = 0.0;
  LossBreakdown loss;
  double running_total = 0.0;
  nlohmann::ordered_json to_json() const;
};

/// Owns the model, optimizer state, and sampling RNG of a training run.
class Trainer {
 public:
  Trainer(RunConfig config, LoadedDataset data, DescriptorBank bank);

  /// One optimization step. Throws DivergenceError on a non-finite loss
  /// after writing a diagnostic dump into the output directory.
  StepMetrics step();
  /// Runs until `optim.steps`, honoring eval.every / stop_at_map. Appends
  /// one metrics record per step to the log when an output dir is set.
  void run();

  int current_step() const { return step_; }
  const RunConfig& config() const { return config_; }
  const LoadedDataset& data() const { return data_; }
  SiaModel& model() { return model_; }
  const SiaModel& model() const { return model_; }
  const std::vector<StepMetrics>& history() const { return history_; }
  double learning_rate_at(int step) const;

  /// Parameters, optimizer moments, RNG, and running averages.
  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

  /// Training-set evaluation with the configured thresholds.
  EvalReport evaluate_training_set();
  std::string metrics_log_path() const;
  std::string checkpoint_path() const;
  std::string state_path() const;

 private:
  std::vector<std::size_t> sample_batch();

  RunConfig config_;
  LoadedDataset data_;
  DescriptorBank bank_;
  SiaModel model_;
  std::vector<Eigen::MatrixXd> adam_m_, adam_v_;
  std::mt19937_64 rng_;
  int step_ = 0;
  double running_total_ = 0.0;
  std::vector<StepMetrics> history_;
  std::vector<std::vector<std::size_t>> clips_by_class_;
};

/// Trains per `config`, writing checkpoint and metrics into output_dir.
/// A non-empty `resume_state` continues a saved run.
void train(const RunConfig& config, const std::string& resume_state = {});

/// Scored detections of every class for each clip.
std::vector<DetectionRecord> detect(const SiaModel& model, std::span<const Clip> clips,
                                    std::span<const std::string> clip_ids, DescriptorBank& bank,
                                    double p_act_threshold);

struct DatasetEvaluation {
  EvalReport report;
  std::vector<DetectionRecord> detections;
};

DatasetEvaluation evaluate_model(const SiaModel& model, const LoadedDataset& data,
                                 DescriptorBank& bank, double p_act_threshold,
                                 double iou_threshold);

/// Suite file: {"version": 1, "frames": T, "stride": s, "iou_threshold": x,
/// "p_act_threshold": y, "datasets": [{"name", "manifest", "bank"}]}.
/// Paths are relative to the suite file.
nlohmann::ordered_json benchmark(const SiaModel& model, const std::string& suite_path);

struct BaseNovelSplit {
  std::vector<ActionId> base_classes;
  std::vector<ActionId> novel_classes;
  DatasetManifest base;
  DatasetManifest novel;
};

/// Seeded class-level split with round(ratio * C) base classes. Clips whose
/// boxes carry only novel labels form the novel manifest; every other clip
/// goes to the base manifest with novel labels removed.
BaseNovelSplit split_base_novel(const DatasetManifest& manifest, const ActionVocabulary& vocab,
                                double ratio, std::uint64_t seed);

}  // namespace sia

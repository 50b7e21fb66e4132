// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sia/geometry.hpp"
#include "sia/vocab.hpp"

namespace sia {

using ActionSet = std::set<ActionId>;

/// Human boxes on one keyframe, each with a multi-label action set.
struct KeyframeAnnotation {
  std::string clip_id;
  std::vector<BoxXYXY> boxes;
  std::vector<ActionSet> action_sets;
  /// Parallel to boxes; empty optional for rows lacking a person id. May be
  /// left empty entirely when no source supplies person ids.
  std::vector<std::optional<int>> person_ids;
  /// Video-level label of Kinetics-style sources.
  std::optional<ActionId> global_action;

  std::size_t size() const { return boxes.size(); }
  /// Throws ValidationError on size mismatch, invalid boxes, or (when `vocab`
  /// is given) unresolvable action ids.
  void validate(const ActionVocabulary* vocab = nullptr) const;

  bool operator==(const KeyframeAnnotation&) const = default;
};

/// Fixed-length frame sequence, H x W x 3 per frame, values in [0,1].
struct Clip {
  int frames = 0;
  int height = 0;
  int width = 0;
  int keyframe_index = 0;
  std::vector<float> pixels;  // frame-major, then row, column, channel

  Clip() = default;
  Clip(int frames, int height, int width);

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * 3; }
  float at(int t, int y, int x, int c) const {
    return pixels[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  float& at(int t, int y, int x, int c) {
    return pixels[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  bool operator==(const Clip&) const = default;
};

/// Default keyframe: the middle frame.
inline int middle_frame(int frames) { return frames / 2; }

struct ManifestEntry {
  std::string clip_id;
  /// Frame-source locator (path of a raw frame file), relative to the data root.
  std::string frames;
  /// Index of the annotated keyframe inside the frame source.
  int source_keyframe = 0;
  KeyframeAnnotation annotation;
  /// Refinement output: labels appended per box. Empty when unrefined.
  std::vector<ActionSet> pseudo_actions;
  /// Refinement provenance for this entry; null when unrefined.
  nlohmann::ordered_json provenance;

  /// Original labels united with pseudo labels.
  std::vector<ActionSet> training_action_sets() const;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string vocabulary_ref;
  /// Manifest-level refinement record; null when unrefined.
  nlohmann::ordered_json provenance;

  /// Throws ValidationError on duplicate clip ids.
  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

// AVA-style CSV: video_id,timestamp,x1,y1,x2,y2,action_id,person_id.
// Keyframes are identified by clip id "<video_id>@<timestamp>".
std::string ava_clip_id(std::string_view video_id, std::string_view timestamp);
std::vector<KeyframeAnnotation> parse_ava_csv(std::istream& in);
std::vector<KeyframeAnnotation> parse_ava_csv(std::string_view text);
std::string serialize_ava_csv(const std::vector<KeyframeAnnotation>& annotations);

/// Which frames of each video to slice tubes at. When absent, every frame
/// index annotated by any tube of the video is used.
using KeyframeSelection = std::map<std::string, std::vector<int>>;

/// Tube document: {video_id: [{"action": name, "frames": [{"index": i,
/// "box": [x1,y1,x2,y2]}]}]}. Clip ids are "<video_id>@<frame index>".
std::vector<KeyframeAnnotation> parse_tube_annotations(
    const nlohmann::json& doc, const ActionVocabulary& vocab,
    const KeyframeSelection* keyframes = nullptr);

/// `clip_id,global_action_name` rows.
std::map<std::string, ActionId> parse_global_action_sidecar(std::string_view text,
                                                            const ActionVocabulary& vocab);
void attach_global_actions(std::vector<KeyframeAnnotation>& annotations,
                           const std::map<std::string, ActionId>& sidecar);

/// Drops every label in `blocklist`; boxes left with no labels are removed.
void apply_class_blocklist(std::vector<KeyframeAnnotation>& annotations,
                           const std::set<ActionId>& blocklist);

/// Random-access source of equally-sized frames.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int num_frames() const = 0;
  virtual int height() const = 0;
  virtual int width() const = 0;
  /// Copies frame `index` (H*W*3 floats) into `out`.
  virtual void read_frame(int index, float* out) const = 0;
};

/// Frames held in memory, e.g. a synthetic clip or a loaded raw file.
class InMemoryFrameSource : public FrameSource {
 public:
  explicit InMemoryFrameSource(Clip frames) : frames_(std::move(frames)) {}
  int num_frames() const override { return frames_.frames; }
  int height() const override { return frames_.height; }
  int width() const override { return frames_.width; }
  void read_frame(int index, float* out) const override;

 private:
  Clip frames_;
};

/// Raw frame file: "SIAF", u32 T, u32 H, u32 W (little endian), then
/// T*H*W*3 little-endian float32 values.
void write_raw_frames(const std::string& path, const Clip& frames);
Clip read_raw_frames(const std::string& path);
std::unique_ptr<FrameSource> open_raw_frames(const std::string& path);

/// T frames at `stride` centered on `keyframe` (which lands at floor(T/2));
/// out-of-range indices repeat the boundary frame.
Clip sample_clip_frames(const FrameSource& source, int keyframe, int frames, int stride);
/// Source frame indices chosen by sample_clip_frames.
std::vector<int> clip_frame_indices(int num_source_frames, int keyframe, int frames, int stride);

}  // namespace sia

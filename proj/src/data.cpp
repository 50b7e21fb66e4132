// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <tuple>

#include "sia/errors.hpp"
#include "sia/format.hpp"

namespace sia {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

double parse_double_field(std::string_view field, const char* name, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
  }
  return value;
}

int parse_int_field(std::string_view field, const char* name, std::size_t line) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
  }
  return value;
}

void check_unit_coord(double v, std::size_t line) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError("line " + std::to_string(line) + ": coordinate " +
                          format_double(v) + " outside [0,1]");
  }
}

}  // namespace

void KeyframeAnnotation::validate(const ActionVocabulary* vocab) const {
  if (boxes.size() != action_sets.size()) {
    throw ValidationError(clip_id + ": boxes and action sets differ in length");
  }
  if (!person_ids.empty() && person_ids.size() != boxes.size()) {
    throw ValidationError(clip_id + ": person ids and boxes differ in length");
  }
  for (const auto& b : boxes) {
    if (!b.valid()) throw ValidationError(clip_id + ": invalid box");
  }
  if (vocab != nullptr) {
    for (const auto& set : action_sets) {
      for (ActionId a : set) {
        if (!vocab->contains(a)) {
          throw ValidationError(clip_id + ": unknown action id " + std::to_string(a));
        }
      }
    }
    if (global_action && !vocab->contains(*global_action)) {
      throw ValidationError(clip_id + ": unknown global action id " +
                            std::to_string(*global_action));
    }
  }
}

Clip::Clip(int frames_, int height_, int width_)
    : frames(frames_),
      height(height_),
      width(width_),
      keyframe_index(middle_frame(frames_)),
      pixels(static_cast<std::size_t>(frames_) * height_ * width_ * 3, 0.0f) {}

std::vector<ActionSet> ManifestEntry::training_action_sets() const {
  std::vector<ActionSet> out = annotation.action_sets;
  for (std::size_t i = 0; i < out.size() && i < pseudo_actions.size(); ++i) {
    out[i].insert(pseudo_actions[i].begin(), pseudo_actions[i].end());
  }
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.clip_id).second) {
      throw ValidationError("duplicate clip id '" + e.clip_id + "'");
    }
    e.annotation.validate();
    if (!e.pseudo_actions.empty() && e.pseudo_actions.size() != e.annotation.boxes.size()) {
      throw ValidationError(e.clip_id + ": pseudo_actions and boxes differ in length");
    }
  }
}

std::string ava_clip_id(std::string_view video_id, std::string_view timestamp) {
  std::string id(video_id);
  id += '@';
  id += timestamp;
  return id;
}

std::vector<KeyframeAnnotation> parse_ava_csv(std::istream& in) {
  std::vector<KeyframeAnnotation> out;
  std::map<std::string, std::size_t> keyframe_index;
  // (keyframe, person id) -> box index
  std::map<std::pair<std::size_t, int>, std::size_t> person_index;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != 8) {
      throw ParseError("expected 8 fields, found " + std::to_string(fields.size()), line_no);
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError("empty video id or timestamp", line_no);
    }
    BoxXYXY box{parse_double_field(fields[2], "x1", line_no),
                parse_double_field(fields[3], "y1", line_no),
                parse_double_field(fields[4], "x2", line_no),
                parse_double_field(fields[5], "y2", line_no)};
    for (double v : {box.x1, box.y1, box.x2, box.y2}) check_unit_coord(v, line_no);
    if (box.x1 > box.x2 || box.y1 > box.y2) {
      throw ValidationError("line " + std::to_string(line_no) + ": inverted box");
    }
    const ActionId action = parse_int_field(fields[6], "action_id", line_no);
    std::optional<int> person;
    if (!fields[7].empty()) person = parse_int_field(fields[7], "person_id", line_no);

    const std::string clip_id = ava_clip_id(fields[0], fields[1]);
    auto [it, inserted] = keyframe_index.try_emplace(clip_id, out.size());
    if (inserted) {
      KeyframeAnnotation ann;
      ann.clip_id = clip_id;
      out.push_back(std::move(ann));
    }
    KeyframeAnnotation& ann = out[it->second];
    if (person) {
      const auto key = std::make_pair(it->second, *person);
      const auto found = person_index.find(key);
      if (found != person_index.end()) {
        ann.action_sets[found->second].insert(action);
        continue;
      }
      person_index.emplace(key, ann.boxes.size());
    }
    ann.boxes.push_back(box);
    ann.action_sets.push_back({action});
    ann.person_ids.push_back(person);
  }
  return out;
}

std::vector<KeyframeAnnotation> parse_ava_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_ava_csv(in);
}

std::string serialize_ava_csv(const std::vector<KeyframeAnnotation>& annotations) {
  std::string out;
  for (const auto& ann : annotations) {
    const std::size_t at = ann.clip_id.rfind('@');
    if (at == std::string::npos) {
      throw ValidationError("clip id '" + ann.clip_id + "' is not of the form video@timestamp");
    }
    const std::string video = ann.clip_id.substr(0, at);
    const std::string timestamp = ann.clip_id.substr(at + 1);
    for (std::size_t i = 0; i < ann.boxes.size(); ++i) {
      const auto& b = ann.boxes[i];
      std::string person;
      if (i < ann.person_ids.size() && ann.person_ids[i]) {
        person = std::to_string(*ann.person_ids[i]);
      }
      for (ActionId a : ann.action_sets[i]) {
        out += video + ',' + timestamp + ',' + format_double(b.x1) + ',' +
               format_double(b.y1) + ',' + format_double(b.x2) + ',' +
               format_double(b.y2) + ',' + std::to_string(a) + ',' + person + '\n';
      }
    }
  }
  return out;
}

std::vector<KeyframeAnnotation> parse_tube_annotations(const nlohmann::json& doc,
                                                       const ActionVocabulary& vocab,
                                                       const KeyframeSelection* keyframes) {
  if (!doc.is_object()) throw ValidationError("tube document must be an object");
  struct Tube {
    ActionId action;
    std::vector<int> index;
    std::vector<BoxXYXY> boxes;
  };
  std::vector<KeyframeAnnotation> out;
  for (const auto& [video_id, tubes_json] : doc.items()) {
    if (video_id == "version") continue;
    if (!tubes_json.is_array()) {
      throw ValidationError("video '" + video_id + "': tubes must be a list");
    }
    std::vector<Tube> tubes;
    std::set<int> annotated;
    for (const auto& t : tubes_json) {
      Tube tube;
      const std::string action = t.at("action").get<std::string>();
      const auto id = vocab.find(action);
      if (!id) throw ValidationError("video '" + video_id + "': unknown action '" + action + "'");
      tube.action = *id;
      for (const auto& f : t.at("frames")) {
        const int index = f.at("index").get<int>();
        if (!tube.index.empty() && index <= tube.index.back()) {
          throw ValidationError("video '" + video_id +
                                "': tube frame indices are not strictly increasing");
        }
        const auto& b = f.at("box");
        if (!b.is_array() || b.size() != 4) {
          throw ValidationError("video '" + video_id + "': box must have 4 coordinates");
        }
        BoxXYXY box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                    b[3].get<double>()};
        if (!box.valid()) throw ValidationError("video '" + video_id + "': invalid box");
        tube.index.push_back(index);
        tube.boxes.push_back(box);
        annotated.insert(index);
      }
      if (!tube.index.empty()) tubes.push_back(std::move(tube));
    }

    std::vector<int> wanted;
    if (keyframes != nullptr) {
      const auto it = keyframes->find(video_id);
      if (it == keyframes->end()) continue;
      wanted = it->second;
    } else {
      wanted.assign(annotated.begin(), annotated.end());
    }
    for (int k : wanted) {
      KeyframeAnnotation ann;
      ann.clip_id = video_id + "@" + std::to_string(k);
      for (const auto& tube : tubes) {
        if (k < tube.index.front() || k > tube.index.back()) continue;
        const auto upper = std::lower_bound(tube.index.begin(), tube.index.end(), k);
        const std::size_t hi = static_cast<std::size_t>(upper - tube.index.begin());
        BoxXYXY box;
        if (tube.index[hi] == k) {
          box = tube.boxes[hi];
        } else {
          // Gap inside the tube: interpolate between the neighbouring frames.
          const std::size_t lo = hi - 1;
          const double t = static_cast<double>(k - tube.index[lo]) /
                           static_cast<double>(tube.index[hi] - tube.index[lo]);
          const auto& a = tube.boxes[lo];
          const auto& b = tube.boxes[hi];
          box = {a.x1 + t * (b.x1 - a.x1), a.y1 + t * (b.y1 - a.y1), a.x2 + t * (b.x2 - a.x2),
                 a.y2 + t * (b.y2 - a.y2)};
        }
        ann.boxes.push_back(box);
        ann.action_sets.push_back({tube.action});
      }
      out.push_back(std::move(ann));
    }
  }
  return out;
}

std::map<std::string, ActionId> parse_global_action_sidecar(std::string_view text,
                                                            const ActionVocabulary& vocab) {
  std::map<std::string, ActionId> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError("expected clip_id,global_action_name", line_no);
    const std::string clip(trim(line.substr(0, comma)));
    const std::string name(trim(line.substr(comma + 1)));
    const auto id = vocab.find(name);
    if (!id) throw ValidationError("line " + std::to_string(line_no) + ": unknown action '" + name + "'");
    out[clip] = *id;
  }
  return out;
}

void attach_global_actions(std::vector<KeyframeAnnotation>& annotations,
                           const std::map<std::string, ActionId>& sidecar) {
  for (auto& ann : annotations) {
    auto it = sidecar.find(ann.clip_id);
    if (it == sidecar.end()) {
      // AVA-style ids carry a timestamp; the sidecar may be keyed per video.
      const std::size_t at = ann.clip_id.rfind('@');
      if (at != std::string::npos) it = sidecar.find(ann.clip_id.substr(0, at));
    }
    if (it != sidecar.end()) ann.global_action = it->second;
  }
}

void apply_class_blocklist(std::vector<KeyframeAnnotation>& annotations,
                           const std::set<ActionId>& blocklist) {
  for (auto& ann : annotations) {
    KeyframeAnnotation kept;
    kept.clip_id = ann.clip_id;
    kept.global_action = ann.global_action;
    if (kept.global_action && blocklist.count(*kept.global_action)) kept.global_action.reset();
    for (std::size_t i = 0; i < ann.boxes.size(); ++i) {
      ActionSet set;
      for (ActionId a : ann.action_sets[i]) {
        if (!blocklist.count(a)) set.insert(a);
      }
      if (set.empty()) continue;
      kept.boxes.push_back(ann.boxes[i]);
      kept.action_sets.push_back(std::move(set));
      if (i < ann.person_ids.size()) kept.person_ids.push_back(ann.person_ids[i]);
    }
    ann = std::move(kept);
  }
}

std::vector<int> clip_frame_indices(int num_source_frames, int keyframe, int frames, int stride) {
  if (frames < 1) throw ArgumentError("clip length must be at least 1");
  if (stride < 1) throw ArgumentError("stride must be at least 1");
  if (num_source_frames < 1) throw IoError("frame source is empty");
  const int center = middle_frame(frames);
  std::vector<int> idx(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    idx[static_cast<std::size_t>(i)] =
        std::clamp(keyframe + (i - center) * stride, 0, num_source_frames - 1);
  }
  return idx;
}

Clip sample_clip_frames(const FrameSource& source, int keyframe, int frames, int stride) {
  if (keyframe < 0 || keyframe >= source.num_frames()) {
    throw ArgumentError("keyframe " + std::to_string(keyframe) + " outside the frame source");
  }
  const auto idx = clip_frame_indices(source.num_frames(), keyframe, frames, stride);
  Clip clip(frames, source.height(), source.width());
  for (int t = 0; t < frames; ++t) {
    source.read_frame(idx[static_cast<std::size_t>(t)], clip.pixels.data() + t * clip.frame_size());
  }
  clip.keyframe_index = middle_frame(frames);
  return clip;
}

void InMemoryFrameSource::read_frame(int index, float* out) const {
  if (index < 0 || index >= frames_.frames) throw IoError("frame index out of range");
  const auto begin = frames_.pixels.begin() + static_cast<std::ptrdiff_t>(index * frames_.frame_size());
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(frames_.frame_size()), out);
}

}  // namespace sia

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "sia/errors.hpp"
#include "sia/format.hpp"

namespace sia {
namespace {

bool detection_before(const ScoredBox& a, const ScoredBox& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.clip_id != b.clip_id) return a.clip_id < b.clip_id;
  return a.box < b.box;
}

}  // namespace

std::optional<double> average_precision(std::span<const ScoredBox> detections,
                                        std::span<const GroundTruthBox> ground_truth,
                                        double iou_threshold) {
  if (ground_truth.empty()) return std::nullopt;

  std::map<std::string, std::vector<std::size_t>> gt_by_clip;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    gt_by_clip[ground_truth[g].clip_id].push_back(g);
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detection_before(detections[a], detections[b]);
  });

  std::vector<char> taken(ground_truth.size(), 0);
  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ScoredBox& det = detections[order[k]];
    const auto it = gt_by_clip.find(det.clip_id);
    long best = -1;
    double best_iou = -1.0;
    if (it != gt_by_clip.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double v = iou(det.box, ground_truth[g].box);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<long>(g);
        }
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      taken[static_cast<std::size_t>(best)] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(ground_truth.size()));
  }

  // Precision envelope from the right, integrated over recall steps.
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return std::clamp(ap, 0.0, 1.0);
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["iou_threshold"] = iou_threshold;
  j["map"] = mean_ap;
  auto& per = j["per_class"] = nlohmann::ordered_json::object();
  for (const auto& c : per_class) {
    nlohmann::ordered_json entry;
    entry["id"] = c.class_id;
    entry["ap"] = c.ap ? nlohmann::ordered_json(*c.ap) : nlohmann::ordered_json(nullptr);
    entry["gt_count"] = c.gt_count;
    entry["detections"] = c.detection_count;
    per[c.name] = std::move(entry);
  }
  return j;
}

EvalReport evaluate(std::span<const DetectionRecord> detections,
                    std::span<const KeyframeAnnotation> ground_truth,
                    const ActionVocabulary& vocab, double iou_threshold) {
  const std::size_t n_classes = vocab.size();
  std::vector<std::vector<GroundTruthBox>> gts(n_classes);
  std::vector<std::vector<ScoredBox>> dets(n_classes);
  std::set<std::string> clips;
  for (const auto& ann : ground_truth) {
    clips.insert(ann.clip_id);
    if (ann.boxes.size() != ann.action_sets.size()) {
      throw ValidationError(ann.clip_id + ": boxes and action sets differ in length");
    }
    for (std::size_t b = 0; b < ann.boxes.size(); ++b) {
      for (ActionId a : ann.action_sets[b]) {
        if (!vocab.contains(a)) {
          throw ValidationError(ann.clip_id + ": unknown ground-truth class " + std::to_string(a));
        }
        gts[static_cast<std::size_t>(a)].push_back({ann.clip_id, ann.boxes[b]});
      }
    }
  }
  for (const auto& d : detections) {
    if (!vocab.contains(d.class_id)) {
      throw ValidationError("detection with unknown class id " + std::to_string(d.class_id));
    }
    if (!clips.count(d.clip_id)) {
      throw ValidationError("detection for clip '" + d.clip_id + "' without ground truth");
    }
    if (!std::isfinite(d.score)) throw ValidationError("detection with non-finite score");
    dets[static_cast<std::size_t>(d.class_id)].push_back({d.clip_id, d.box, d.score});
  }

  EvalReport report;
  report.iou_threshold = iou_threshold;
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& cls : vocab.classes()) {
    const auto c = static_cast<std::size_t>(cls.id);
    ClassResult r;
    r.class_id = cls.id;
    r.name = cls.name;
    r.gt_count = gts[c].size();
    r.detection_count = dets[c].size();
    r.ap = average_precision(dets[c], gts[c], iou_threshold);
    if (r.ap) {
      sum += *r.ap;
      ++counted;
    }
    report.per_class.push_back(std::move(r));
  }
  report.mean_ap = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  return report;
}

std::string write_detection_csv(std::span<const DetectionRecord> detections) {
  std::string out;
  for (const auto& d : detections) {
    out += d.clip_id + ',' + format_double(d.box.x1) + ',' + format_double(d.box.y1) + ',' +
           format_double(d.box.x2) + ',' + format_double(d.box.y2) + ',' +
           std::to_string(d.class_id) + ',' + format_double(d.score) + '\n';
  }
  return out;
}

std::vector<DetectionRecord> parse_detection_csv(std::string_view text) {
  std::vector<DetectionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto pos = rest.find(',');
      f.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != 7) throw ParseError("expected 7 fields, found " + std::to_string(f.size()), line_no);
    auto num = [&](std::string_view s) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw ParseError("invalid number '" + std::string(s) + "'", line_no);
      }
      return v;
    };
    DetectionRecord d;
    d.clip_id = std::string(f[0]);
    d.box = {num(f[1]), num(f[2]), num(f[3]), num(f[4])};
    int cls = 0;
    const auto [p, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), cls);
    if (ec != std::errc() || p != f[5].data() + f[5].size()) {
      throw ParseError("invalid class id '" + std::string(f[5]) + "'", line_no);
    }
    d.class_id = cls;
    d.score = num(f[6]);
    if (!d.box.valid()) throw ValidationError("line " + std::to_string(line_no) + ": invalid box");
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace sia

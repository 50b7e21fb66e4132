// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/weaksup.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "sia/errors.hpp"
#include "sia/log.hpp"
#include "sia/matching.hpp"

namespace sia {
namespace {

nlohmann::ordered_json sets_json(const std::vector<ActionSet>& sets) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : sets) arr.push_back(std::vector<ActionId>(s.begin(), s.end()));
  return arr;
}

std::vector<ActionSet> sets_from(const nlohmann::json& arr) {
  std::vector<ActionSet> out;
  for (const auto& s : arr) {
    ActionSet set;
    for (const auto& a : s) set.insert(a.get<ActionId>());
    out.push_back(std::move(set));
  }
  return out;
}

PseudolabelRecord empty_record(const KeyframeAnnotation& ann, WeakSupMode mode) {
  PseudolabelRecord r;
  r.clip_id = ann.clip_id;
  r.method = mode;
  r.original = ann.action_sets;
  r.appended.assign(ann.boxes.size(), {});
  return r;
}

}  // namespace

std::string to_string(WeakSupMode mode) { return mode == WeakSupMode::kNws ? "NWS" : "AWS"; }

WeakSupMode parse_weaksup_mode(const std::string& s) {
  if (s == "NWS" || s == "nws") return WeakSupMode::kNws;
  if (s == "AWS" || s == "aws") return WeakSupMode::kAws;
  throw ArgumentError("unknown weak-supervision mode '" + s + "'");
}

std::size_t PseudolabelRecord::assigned_count() const {
  return static_cast<std::size_t>(
      std::count_if(appended.begin(), appended.end(), [](const ActionSet& s) { return !s.empty(); }));
}

std::vector<ActionSet> PseudolabelRecord::expanded() const {
  std::vector<ActionSet> out = original;
  for (std::size_t i = 0; i < out.size() && i < appended.size(); ++i) {
    out[i].insert(appended[i].begin(), appended[i].end());
  }
  return out;
}

nlohmann::ordered_json PseudolabelRecord::to_json() const {
  nlohmann::ordered_json j;
  j["clip_id"] = clip_id;
  j["method"] = to_string(method);
  j["original"] = sets_json(original);
  j["appended"] = sets_json(appended);
  if (method == WeakSupMode::kAws) {
    auto& sims = j["similarity"] = nlohmann::ordered_json::array();
    for (const auto& s : similarity) sims.push_back(s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr));
  }
  if (!warning.empty()) j["warning"] = warning;
  return j;
}

PseudolabelRecord PseudolabelRecord::from_json(const nlohmann::json& doc) {
  PseudolabelRecord r;
  r.clip_id = doc.at("clip_id").get<std::string>();
  r.method = parse_weaksup_mode(doc.at("method").get<std::string>());
  r.original = sets_from(doc.at("original"));
  r.appended = sets_from(doc.at("appended"));
  if (doc.contains("similarity")) {
    for (const auto& s : doc.at("similarity")) {
      r.similarity.push_back(s.is_null() ? std::optional<double>() : std::optional<double>(s.get<double>()));
    }
  }
  r.warning = doc.value("warning", std::string());
  return r;
}

PseudolabelRecord nws_expand(const KeyframeAnnotation& ann) {
  PseudolabelRecord r = empty_record(ann, WeakSupMode::kNws);
  if (!ann.global_action) {
    r.warning = "no global action; skipped";
    return r;
  }
  for (auto& s : r.appended) s.insert(*ann.global_action);
  return r;
}

PseudolabelRecord aws_assign(const KeyframeAnnotation& ann, std::span<const DetectionTriplet> triplets,
                             const DescriptorBank& bank, const AwsOptions& options) {
  PseudolabelRecord r = empty_record(ann, WeakSupMode::kAws);
  r.similarity.assign(ann.boxes.size(), std::nullopt);
  if (!ann.global_action) {
    r.warning = "no global action; skipped";
    return r;
  }
  if (ann.boxes.empty()) {
    r.warning = "no ground-truth boxes";
    return r;
  }
  if (triplets.empty()) {
    r.warning = "no predictions";
    return r;
  }
  const auto& descriptors = bank.embeddings(*ann.global_action);
  const Assignment assignment =
      hungarian(build_match_cost(triplets, ann, options.lambda_actor, options.lambda_box));
  std::vector<std::size_t> matched;
  for (const auto& [pred, gt] : assignment.pairs) {
    r.similarity[gt] = averaged_similarity(triplets[pred].embedding, descriptors);
    matched.push_back(gt);
  }
  std::sort(matched.begin(), matched.end(), [&](std::size_t a, std::size_t b) {
    if (*r.similarity[a] != *r.similarity[b]) return *r.similarity[a] > *r.similarity[b];
    return a < b;
  });
  const std::size_t take = std::min(options.top_k, matched.size());
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t box = matched[k];
    if (options.min_similarity && *r.similarity[box] < *options.min_similarity) continue;
    r.appended[box].insert(*ann.global_action);
  }
  return r;
}

RefinementResult run_refinement(const DatasetManifest& manifest, const SiaModel* model,
                                DescriptorBank* bank, const ClipLoader& load_clip,
                                const RefinementOptions& options) {
  const bool aws = options.mode == WeakSupMode::kAws;
  if (aws) {
    if (model == nullptr) throw ConfigError("AWS refinement requires a model checkpoint");
    if (bank == nullptr) throw ConfigError("AWS refinement requires a descriptor bank");
    if (!load_clip) throw ConfigError("AWS refinement requires a clip loader");
  }
  manifest.validate();

  std::map<std::string, PseudolabelRecord> previous;
  if (!options.log_path.empty() && std::filesystem::exists(options.log_path)) {
    std::ifstream in(options.log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto rec = PseudolabelRecord::from_json(nlohmann::json::parse(line));
        if (rec.method == options.mode) previous[rec.clip_id] = std::move(rec);
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted run is recomputed.
        break;
      }
    }
  }

  std::optional<Clip> first_clip;
  if (aws) {
    // Fail before producing output when the checkpoint cannot consume the clips.
    for (const auto& e : manifest.entries) {
      if (!e.annotation.global_action || previous.count(e.clip_id)) continue;
      first_clip = load_clip(e);
      const auto& cfg = model->config();
      if (first_clip->frames != cfg.frames || first_clip->height != cfg.image_size ||
          first_clip->width != cfg.image_size) {
        throw ConfigError("checkpoint config does not match clip '" + e.clip_id + "'");
      }
      break;
    }
    bank->cache_embeddings([model](const std::string& s) { return model->encode_text(s); },
                           model->text_weights_version());
  }

  std::ofstream log;
  if (!options.log_path.empty()) {
    // Rewrite the log with the reusable prefix so torn lines disappear.
    std::ofstream rewrite(options.log_path, std::ios::trunc);
    for (const auto& e : manifest.entries) {
      const auto it = previous.find(e.clip_id);
      if (it != previous.end()) rewrite << it->second.to_json().dump() << '\n';
    }
    rewrite.close();
    log.open(options.log_path, std::ios::app);
    if (!log) throw IoError("cannot open record log '" + options.log_path + "'");
  }

  RefinementResult result;
  result.manifest.vocabulary_ref = manifest.vocabulary_ref;
  nlohmann::ordered_json prov;
  prov["mode"] = to_string(options.mode);
  if (aws) {
    prov["top_k"] = options.aws.top_k;
    prov["min_similarity"] = options.aws.min_similarity ? nlohmann::ordered_json(*options.aws.min_similarity)
                                                        : nlohmann::ordered_json(nullptr);
    prov["checkpoint"] = options.checkpoint_id;
    prov["checkpoint_config_hash"] = std::to_string(model->config().hash());
  }
  std::size_t refined = 0;
  for (const auto& e : manifest.entries) {
    ManifestEntry out = e;
    if (!e.annotation.global_action) {
      result.manifest.entries.push_back(std::move(out));
      continue;
    }
    PseudolabelRecord rec;
    const auto it = previous.find(e.clip_id);
    if (it != previous.end()) {
      rec = it->second;
    } else {
      if (aws) {
        Clip clip = first_clip ? std::move(*first_clip) : load_clip(e);
        first_clip.reset();
        const auto triplets = model->encode_video(clip);
        rec = aws_assign(e.annotation, triplets, *bank, options.aws);
      } else {
        rec = nws_expand(e.annotation);
      }
      if (log.is_open()) {
        log << rec.to_json().dump() << '\n';
        log.flush();
      }
    }
    if (!rec.warning.empty()) log_warning(e.clip_id + ": " + rec.warning);
    out.pseudo_actions = rec.appended;
    nlohmann::ordered_json ep;
    ep["method"] = to_string(rec.method);
    if (aws) {
      auto& sims = ep["similarity"] = nlohmann::ordered_json::array();
      for (const auto& s : rec.similarity) sims.push_back(s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr));
    }
    if (!rec.warning.empty()) ep["warning"] = rec.warning;
    out.provenance = std::move(ep);
    result.manifest.entries.push_back(std::move(out));
    result.records.push_back(std::move(rec));
    ++refined;
  }
  prov["refined_entries"] = refined;
  if (refined > 0) result.manifest.provenance = std::move(prov);
  return result;
}

}  // namespace sia

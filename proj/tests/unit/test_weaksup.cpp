// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "sia/errors.hpp"
#include "sia/manifest_io.hpp"
#include "sia/synthetic.hpp"
#include "sia/weaksup.hpp"
#include "support/temp_dir.hpp"

using namespace sia;

namespace {

KeyframeAnnotation global_clip(std::size_t boxes, std::optional<ActionId> global) {
  KeyframeAnnotation ann;
  ann.clip_id = "g";
  for (std::size_t i = 0; i < boxes; ++i) {
    const double x = 0.3 * static_cast<double>(i);
    ann.boxes.push_back({x, 0.1, x + 0.25, 0.6});
    ann.action_sets.push_back({static_cast<ActionId>(10 + i)});
  }
  ann.global_action = global;
  return ann;
}

DetectionTriplet at_box(const BoxXYXY& b, double cos_to_global) {
  DetectionTriplet t;
  t.box = to_cxcywh(b);
  t.p_act = 0.95;
  t.embedding = Eigen::VectorXd(2);
  t.embedding << cos_to_global, std::sqrt(1.0 - cos_to_global * cos_to_global);
  return t;
}

/// Class 0 embeds along x, every other class along y.
DescriptorBank axis_bank(std::size_t classes) {
  std::vector<std::vector<std::string>> d(classes);
  for (std::size_t c = 0; c < classes; ++c) d[c] = {c == 0 ? "x" : "y", c == 0 ? "x" : "y"};
  DescriptorBank bank(d);
  bank.cache_embeddings(
      [](const std::string& s) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
        e[s == "x" ? 0 : 1] = 1.0;
        return e;
      },
      1);
  return bank;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SyntheticDataset global_dataset(std::uint64_t seed, int clips) {
  SynthConfig cfg;
  cfg.global_fraction = 0.5;
  cfg.min_actors = 2;
  return generate_synthetic(seed, clips, cfg);
}

ClipLoader loader_for(const SyntheticDataset& ds) {
  std::map<std::string, const Clip*> by_id;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) by_id[ds.manifest.entries[i].clip_id] = &ds.clips[i];
  return [by_id](const ManifestEntry& e) { return *by_id.at(e.clip_id); };
}

}  // namespace

TEST_SUITE("weaksup") {
  TEST_CASE("NWS appends the global action to every box") {
    const auto rec = nws_expand(global_clip(3, 0));
    CHECK(rec.method == WeakSupMode::kNws);
    for (std::size_t b = 0; b < 3; ++b) {
      CHECK(rec.appended[b] == ActionSet{0});
      CHECK(rec.expanded()[b] == ActionSet{0, static_cast<ActionId>(10 + b)});
    }
    CHECK(rec.assigned_count() == 3);
  }

  TEST_CASE("NWS is idempotent and only adds labels") {
    const auto ann = global_clip(2, 11);
    const auto once = nws_expand(ann);
    KeyframeAnnotation again = ann;
    again.action_sets = once.expanded();
    CHECK(nws_expand(again).expanded() == once.expanded());
    for (std::size_t b = 0; b < 2; ++b) {
      for (ActionId a : ann.action_sets[b]) CHECK(once.expanded()[b].count(a) == 1);
    }
  }

  TEST_CASE("NWS without a global action is a warned no-op") {
    const auto rec = nws_expand(global_clip(2, std::nullopt));
    CHECK(rec.assigned_count() == 0);
    CHECK_FALSE(rec.warning.empty());
  }

  TEST_CASE("AWS picks the box most similar to the global action") {
    const auto ann = global_clip(2, 0);
    const std::vector<DetectionTriplet> preds = {at_box(ann.boxes[0], 0.1), at_box(ann.boxes[1], 0.9)};
    const auto bank = axis_bank(12);
    const auto rec = aws_assign(ann, preds, bank);
    CHECK(rec.method == WeakSupMode::kAws);
    CHECK(rec.appended[0].empty());
    CHECK(rec.appended[1] == ActionSet{0});
    CHECK(*rec.similarity[0] == doctest::Approx(0.1));
    CHECK(*rec.similarity[1] == doctest::Approx(0.9));

    AwsOptions two;
    two.top_k = 2;
    CHECK(aws_assign(ann, preds, bank, two).assigned_count() == 2);
    AwsOptions gated;
    gated.top_k = 2;
    gated.min_similarity = 0.5;
    CHECK(aws_assign(ann, preds, bank, gated).assigned_count() == 1);
  }

  TEST_CASE("AWS assigns exactly min(top_k, boxes)") {
    const auto bank = axis_bank(12);
    for (std::size_t boxes = 1; boxes <= 3; ++boxes) {
      const auto ann = global_clip(boxes, 0);
      std::vector<DetectionTriplet> preds;
      for (std::size_t b = 0; b < boxes; ++b) preds.push_back(at_box(ann.boxes[b], 0.2 + 0.1 * static_cast<double>(b)));
      for (std::size_t k = 1; k <= 3; ++k) {
        AwsOptions opts;
        opts.top_k = k;
        CHECK(aws_assign(ann, preds, bank, opts).assigned_count() == std::min(k, boxes));
      }
    }
  }

  TEST_CASE("AWS ties go to the lower box index") {
    const auto ann = global_clip(3, 0);
    const std::vector<DetectionTriplet> preds = {at_box(ann.boxes[0], 0.3), at_box(ann.boxes[1], 0.7),
                                                 at_box(ann.boxes[2], 0.7)};
    const auto rec = aws_assign(ann, preds, axis_bank(13));
    CHECK(rec.appended[1] == ActionSet{0});
    CHECK(rec.appended[2].empty());
  }

  TEST_CASE("AWS edge cases") {
    const auto bank = axis_bank(12);
    const auto single = global_clip(1, 0);
    CHECK(aws_assign(single, std::vector<DetectionTriplet>{at_box(single.boxes[0], -0.5)}, bank).assigned_count() == 1);
    CHECK_FALSE(aws_assign(global_clip(0, 0), std::vector<DetectionTriplet>{at_box({0, 0, 1, 1}, 0.5)}, bank).warning.empty());
    CHECK_FALSE(aws_assign(single, {}, bank).warning.empty());
    CHECK(aws_assign(global_clip(1, std::nullopt), std::vector<DetectionTriplet>{at_box(single.boxes[0], 0.5)}, bank)
              .assigned_count() == 0);
  }

  TEST_CASE("record json round trip") {
    const auto ann = global_clip(2, 0);
    const auto rec = aws_assign(ann, std::vector<DetectionTriplet>{at_box(ann.boxes[0], 0.25)}, axis_bank(12));
    CHECK_FALSE(rec.similarity[1].has_value());
    CHECK(PseudolabelRecord::from_json(nlohmann::json::parse(rec.to_json().dump())) == rec);
  }

  TEST_CASE("NWS refinement never consults the model") {
    const auto ds = global_dataset(21, 30);
    RefinementOptions opts;
    const ClipLoader boom = [](const ManifestEntry&) -> Clip { throw std::runtime_error("loader used"); };
    const auto result = run_refinement(ds.manifest, nullptr, nullptr, boom, opts);
    std::size_t globals = 0;
    for (std::size_t i = 0; i < ds.manifest.entries.size(); ++i) {
      const auto& in = ds.manifest.entries[i];
      const auto& out = result.manifest.entries[i];
      CHECK(out.annotation == in.annotation);
      if (!in.annotation.global_action) {
        CHECK(out == in);
        continue;
      }
      ++globals;
      for (const auto& s : out.pseudo_actions) CHECK(s == ActionSet{*in.annotation.global_action});
      for (std::size_t b = 0; b < in.annotation.boxes.size(); ++b) {
        for (ActionId a : in.annotation.action_sets[b]) CHECK(out.training_action_sets()[b].count(a) == 1);
      }
    }
    CHECK(globals > 0);
    CHECK(result.records.size() == globals);
    CHECK(result.manifest.provenance["mode"] == "NWS");
  }

  TEST_CASE("AWS refinement requires a model") {
    const auto ds = global_dataset(22, 10);
    RefinementOptions opts;
    opts.mode = WeakSupMode::kAws;
    CHECK_THROWS_AS(run_refinement(ds.manifest, nullptr, nullptr, loader_for(ds), opts), ConfigError);
  }

  TEST_CASE("AWS refinement structure, determinism and resumption") {
    test::TempDir dir;
    const auto ds = global_dataset(23, 24);
    const SiaModel model(ModelConfig::toy());
    DescriptorBank bank = class_name_bank(ds.vocab);
    RefinementOptions opts;
    opts.mode = WeakSupMode::kAws;
    opts.log_path = dir.file("log.jsonl");
    const auto first = run_refinement(ds.manifest, &model, &bank, loader_for(ds), opts);
    const std::string full_log = read_file(opts.log_path);
    for (std::size_t i = 0; i < ds.manifest.entries.size(); ++i) {
      const auto& in = ds.manifest.entries[i];
      const auto& out = first.manifest.entries[i];
      if (!in.annotation.global_action) {
        CHECK(out == in);
        continue;
      }
      std::size_t assigned = 0;
      for (const auto& s : out.pseudo_actions) assigned += !s.empty();
      CHECK(assigned == 1);
      CHECK(out.provenance["method"] == "AWS");
    }

    opts.log_path = dir.file("fresh.jsonl");
    const auto second = run_refinement(ds.manifest, &model, &bank, loader_for(ds), opts);
    CHECK(dump_manifest(second.manifest) == dump_manifest(first.manifest));
    CHECK(read_file(opts.log_path) == full_log);

    // Interrupt: keep two records and half of the third.
    std::istringstream lines(full_log);
    std::string l1, l2, l3;
    std::getline(lines, l1);
    std::getline(lines, l2);
    std::getline(lines, l3);
    opts.log_path = dir.file("torn.jsonl");
    std::ofstream(opts.log_path) << l1 << "\n" << l2 << "\n" << l3.substr(0, l3.size() / 2);
    int loads = 0;
    const ClipLoader base = loader_for(ds);
    const ClipLoader counting = [&](const ManifestEntry& e) {
      ++loads;
      return base(e);
    };
    const auto resumed = run_refinement(ds.manifest, &model, &bank, counting, opts);
    CHECK(dump_manifest(resumed.manifest) == dump_manifest(first.manifest));
    CHECK(read_file(opts.log_path) == full_log);
    CHECK(static_cast<std::size_t>(loads) == first.records.size() - 2);
  }

  TEST_CASE("AWS rejects clips that do not fit the model") {
    SynthConfig cfg;
    cfg.global_fraction = 1.0;
    cfg.frames = 6;
    const auto ds = generate_synthetic(24, 3, cfg);
    const SiaModel model(ModelConfig::toy());
    DescriptorBank bank = class_name_bank(ds.vocab);
    RefinementOptions opts;
    opts.mode = WeakSupMode::kAws;
    CHECK_THROWS_AS(run_refinement(ds.manifest, &model, &bank, loader_for(ds), opts), ConfigError);
  }
}

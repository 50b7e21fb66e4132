// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <random>

#include "doctest.h"
#include "sia/data.hpp"
#include "sia/errors.hpp"
#include "sia/format.hpp"
#include "sia/manifest_io.hpp"
#include "sia/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace sia;

TEST_SUITE("data") {
  TEST_CASE("ava rows with one person merge into a multi-label box") {
    const auto anns = parse_ava_csv("v1,902,0.1,0.1,0.5,0.9,12,0\nv1,902,0.1,0.1,0.5,0.9,17,0");
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].clip_id == "v1@902");
    REQUIRE(anns[0].boxes.size() == 1);
    CHECK(anns[0].action_sets[0] == ActionSet{12, 17});
  }

  TEST_CASE("ava grouping and empty input") {
    CHECK(parse_ava_csv("").empty());
    const auto anns = parse_ava_csv("v1,902,0.1,0.1,0.5,0.9,1,0\nv1,903,0.1,0.1,0.5,0.9,1,0\nv1,903,0.2,0.1,0.6,0.9,2,1\n");
    REQUIRE(anns.size() == 2);
    CHECK(anns[1].boxes.size() == 2);
  }

  TEST_CASE("ava rows without a person id never merge") {
    const auto anns = parse_ava_csv("v,1,0.1,0.1,0.5,0.9,1,\nv,1,0.1,0.1,0.5,0.9,2,\n");
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].boxes.size() == 2);
  }

  TEST_CASE("ava errors") {
    try {
      parse_ava_csv("v,1,0.1,0.1,0.5,0.9,1,0\nv,1,0.1,0.1,0.5\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_ava_csv("v,1,0.1,0.1,1.5,0.9,1,0\n"), ValidationError);
    CHECK_THROWS_AS(parse_ava_csv("v,1,0.1,0.1,zz,0.9,1,0\n"), ParseError);
  }

  TEST_CASE("ava parse, serialize, parse round trip") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> action(0, 79), person(0, 3);
    std::string text;
    for (int r = 0; r < 300; ++r) {
      double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
      if (x1 > x2) std::swap(x1, x2);
      if (y1 > y2) std::swap(y1, y2);
      text += "vid" + std::to_string(r % 4) + "," + std::to_string(900 + r % 7) + "," + format_double(x1) + "," +
              format_double(y1) + "," + format_double(x2) + "," + format_double(y2) + "," +
              std::to_string(action(rng)) + "," + std::to_string(person(rng)) + "\n";
    }
    const auto first = parse_ava_csv(text);
    const std::string again = serialize_ava_csv(first);
    const auto second = parse_ava_csv(again);
    CHECK(first == second);
    CHECK(serialize_ava_csv(second) == again);
  }

  TEST_CASE("tube slicing") {
    const ActionVocabulary vocab = ActionVocabulary::from_names({"run", "jump"});
    nlohmann::json doc = nlohmann::json::parse(R"({
      "version": "1",
      "v": [
        {"action": "run", "frames": [{"index": 0, "box": [0.1, 0.1, 0.3, 0.5]}, {"index": 10, "box": [0.3, 0.1, 0.5, 0.5]}]},
        {"action": "jump", "frames": [{"index": 4, "box": [0.6, 0.2, 0.9, 0.9]}, {"index": 6, "box": [0.6, 0.2, 0.9, 0.9]}]}
      ]})");
    const KeyframeSelection at5 = {{"v", {5}}};
    auto anns = parse_tube_annotations(doc, vocab, &at5);
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].clip_id == "v@5");
    REQUIRE(anns[0].boxes.size() == 2);
    CHECK(anns[0].action_sets[0] == ActionSet{0});
    CHECK(anns[0].boxes[0].x1 == doctest::Approx(0.2));
    CHECK(anns[0].action_sets[1] == ActionSet{1});

    const KeyframeSelection outside = {{"v", {20}}};
    anns = parse_tube_annotations(doc, vocab, &outside);
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].boxes.empty());

    // Default: every annotated frame.
    anns = parse_tube_annotations(doc, vocab);
    CHECK(anns.size() == 4);

    doc["v"][0]["frames"][1]["index"] = 0;
    CHECK_THROWS_AS(parse_tube_annotations(doc, vocab), ValidationError);
  }

  TEST_CASE("global action sidecar attaches by clip or video id") {
    const ActionVocabulary vocab = ActionVocabulary::from_names({"stand", "cracking back"});
    const auto sidecar = parse_global_action_sidecar("v1,cracking back\nv2@3,stand\n", vocab);
    std::vector<KeyframeAnnotation> anns(3);
    anns[0].clip_id = "v1@900";
    anns[1].clip_id = "v2@3";
    anns[2].clip_id = "other@1";
    attach_global_actions(anns, sidecar);
    CHECK(anns[0].global_action == 1);
    CHECK(anns[1].global_action == 0);
    CHECK_FALSE(anns[2].global_action.has_value());
    CHECK_THROWS_AS(parse_global_action_sidecar("v1,nonexistent\n", vocab), ValidationError);
  }

  TEST_CASE("class blocklist") {
    std::vector<KeyframeAnnotation> anns(1);
    anns[0].clip_id = "a";
    anns[0].boxes = {{0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}};
    anns[0].action_sets = {{0, 1}, {1}};
    anns[0].global_action = 1;
    apply_class_blocklist(anns, {1});
    REQUIRE(anns[0].boxes.size() == 1);
    CHECK(anns[0].action_sets[0] == ActionSet{0});
    CHECK_FALSE(anns[0].global_action.has_value());
  }

  TEST_CASE("annotation validation") {
    const ActionVocabulary vocab = ActionVocabulary::from_names({"a"});
    KeyframeAnnotation ann;
    ann.clip_id = "x";
    ann.boxes = {{0, 0, 1, 1}};
    ann.action_sets = {{0}};
    CHECK_NOTHROW(ann.validate(&vocab));
    ann.action_sets = {{3}};
    CHECK_THROWS_AS(ann.validate(&vocab), ValidationError);
    ann.action_sets = {};
    CHECK_THROWS_AS(ann.validate(), ValidationError);
  }

  TEST_CASE("clip frame sampling") {
    CHECK(clip_frame_indices(100, 50, 8, 4) == std::vector<int>{34, 38, 42, 46, 50, 54, 58, 62});
    CHECK(clip_frame_indices(100, 0, 8, 4) == std::vector<int>{0, 0, 0, 0, 0, 4, 8, 12});
    CHECK(clip_frame_indices(100, 99, 4, 2) == std::vector<int>{95, 97, 99, 99});
    CHECK(clip_frame_indices(100, 17, 1, 4) == std::vector<int>{17});

    Clip source(10, 2, 2);
    for (int t = 0; t < 10; ++t) {
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
          for (int c = 0; c < 3; ++c) source.at(t, y, x, c) = static_cast<float>(t) / 10.0f;
        }
      }
    }
    InMemoryFrameSource frames(source);
    for (int T : {1, 2, 3, 4, 7, 8}) {
      for (int key : {0, 3, 9}) {
        const Clip clip = sample_clip_frames(frames, key, T, 3);
        CHECK(clip.frames == T);
        CHECK(clip.keyframe_index == T / 2);
        CHECK(clip.at(T / 2, 0, 0, 0) == static_cast<float>(key) / 10.0f);
      }
    }
  }

  TEST_CASE("raw frame file round trip") {
    test::TempDir dir;
    Clip clip(3, 4, 5);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : clip.pixels) v = u(rng);
    const std::string path = dir.file("clip.f32");
    write_raw_frames(path, clip);
    const Clip back = read_raw_frames(path);
    CHECK(back.frames == 3);
    CHECK(back.height == 4);
    CHECK(back.width == 5);
    CHECK(back.pixels == clip.pixels);
    CHECK_THROWS_AS(read_raw_frames(dir.file("missing.f32")), IoError);
  }

  TEST_CASE("synthetic generator is deterministic") {
    const SynthConfig cfg;
    const auto a = generate_synthetic(7, 20, cfg);
    const auto b = generate_synthetic(7, 20, cfg);
    CHECK(a.manifest == b.manifest);
    CHECK(a.clips == b.clips);
    CHECK(dump_manifest(a.manifest) == dump_manifest(b.manifest));
    const auto c = generate_synthetic(8, 20, cfg);
    CHECK_FALSE(a.clips == c.clips);
  }

  TEST_CASE("synthetic actor counts and labels") {
    SynthConfig one;
    one.max_actors = 1;
    for (const auto& e : generate_synthetic(3, 50, one).manifest.entries) CHECK(e.annotation.boxes.size() == 1);

    const SynthConfig cfg;
    const auto ds = generate_synthetic(4, 100, cfg);
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
      const auto& ann = ds.manifest.entries[i].annotation;
      CHECK(ann.boxes.size() >= 1);
      CHECK(ann.boxes.size() <= 3);
      for (std::size_t b = 0; b < ann.boxes.size(); ++b) {
        const auto& actor = ds.actors[i][b];
        CHECK(ann.action_sets[b] ==
              ActionSet{fine_class(cfg, actor.color, actor.direction), coarse_class(cfg, actor.direction)});
      }
    }
  }

  TEST_CASE("rendered rectangles match their annotated boxes") {
    const SynthConfig cfg;
    const auto ds = generate_synthetic(5, 60, cfg);
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
      const Clip& clip = ds.clips[i];
      const int key = clip.keyframe_index;
      const auto& ann = ds.manifest.entries[i].annotation;
      for (std::size_t b = 0; b < ann.boxes.size(); ++b) {
        const auto& col = cfg.colors[static_cast<std::size_t>(ds.actors[i][b].color)];
        int x_lo = clip.width, x_hi = -1, y_lo = clip.height, y_hi = -1;
        for (int y = 0; y < clip.height; ++y) {
          for (int x = 0; x < clip.width; ++x) {
            if (clip.at(key, y, x, 0) == col.r && clip.at(key, y, x, 1) == col.g && clip.at(key, y, x, 2) == col.b) {
              x_lo = std::min(x_lo, x);
              x_hi = std::max(x_hi, x + 1);
              y_lo = std::min(y_lo, y);
              y_hi = std::max(y_hi, y + 1);
            }
          }
        }
        const auto& box = ann.boxes[b];
        CHECK(std::abs(x_lo - box.x1 * clip.width) <= 1.0);
        CHECK(std::abs(x_hi - box.x2 * clip.width) <= 1.0);
        CHECK(std::abs(y_lo - box.y1 * clip.height) <= 1.0);
        CHECK(std::abs(y_hi - box.y2 * clip.height) <= 1.0);
      }
    }
  }

  TEST_CASE("synthetic classes are all covered over 10k clips") {
    const SynthConfig cfg;
    const ActionVocabulary vocab = synthetic_vocabulary(cfg);
    std::vector<long> counts(vocab.size(), 0);
    for (int chunk = 0; chunk < 20; ++chunk) {
      const auto ds = generate_synthetic(1000 + chunk, 500, cfg);
      for (const auto& e : ds.manifest.entries) {
        for (const auto& s : e.annotation.action_sets) {
          for (ActionId a : s) ++counts[a];
        }
      }
    }
    for (long c : counts) CHECK(c > 500);
  }

  TEST_CASE("global-label synthetic clips") {
    SynthConfig cfg;
    cfg.global_fraction = 1.0;
    cfg.min_actors = 2;
    const auto ds = generate_synthetic(6, 40, cfg);
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
      const auto& ann = ds.manifest.entries[i].annotation;
      REQUIRE(ann.global_action.has_value());
      const int p = ds.performer[i];
      REQUIRE(p >= 0);
      const auto& actor = ds.actors[i][static_cast<std::size_t>(p)];
      CHECK(*ann.global_action == fine_class(cfg, actor.color, actor.direction));
      int performing = 0;
      for (const auto& a : ds.actors[i]) performing += fine_class(cfg, a.color, a.direction) == *ann.global_action;
      CHECK(performing == 1);
      for (const auto& s : ann.action_sets) CHECK(s.size() == 1);
    }
  }

  TEST_CASE("manifest json round trip and validation") {
    SynthConfig cfg;
    cfg.global_fraction = 0.5;
    auto ds = generate_synthetic(9, 12, cfg);
    ds.manifest.entries[0].pseudo_actions = std::vector<ActionSet>(ds.manifest.entries[0].annotation.boxes.size());
    const std::string text = dump_manifest(ds.manifest);
    const DatasetManifest back = manifest_from_json(nlohmann::ordered_json::parse(text));
    CHECK(dump_manifest(back) == text);
    DatasetManifest dup = ds.manifest;
    dup.entries.push_back(dup.entries.front());
    CHECK_THROWS_AS(dup.validate(), ValidationError);
  }
}

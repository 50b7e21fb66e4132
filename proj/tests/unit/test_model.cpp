// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "sia/errors.hpp"
#include "sia/model.hpp"
#include "support/fixtures.hpp"

using namespace sia;

namespace {

Clip noise_clip(std::uint64_t seed, const ModelConfig& cfg) {
  Clip clip(cfg.frames, cfg.image_size, cfg.image_size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : clip.pixels) v = u(rng);
  return clip;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("config validation and json") {
    ModelConfig cfg = ModelConfig::toy();
    CHECK_NOTHROW(cfg.validate());
    CHECK(ModelConfig::from_json(cfg.to_json()).hash() == cfg.hash());
    cfg.patch_size = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ModelConfig::toy();
    cfg.video_width = 63;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(ModelConfig::base16().num_outputs() == 100);
  }

  TEST_CASE("text pooling is part of the config") {
    ModelConfig cfg = ModelConfig::toy();
    CHECK(cfg.text_pooling == TextPooling::kMean);
    auto j = cfg.to_json();
    CHECK(j["text_pooling"] == "mean");
    j["text_pooling"] = "last";
    const ModelConfig last = ModelConfig::from_json(j);
    CHECK(last.text_pooling == TextPooling::kLast);
    CHECK(last.hash() != cfg.hash());
    j["text_pooling"] = "max";
    CHECK_THROWS_AS(ModelConfig::from_json(j), ConfigError);

    const SiaModel mean_model(cfg);
    const SiaModel last_model(last);
    const std::string s = "red moving left";
    CHECK(mean_model.encode_text(s).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(last_model.encode_text(s).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((mean_model.encode_text(s) - last_model.encode_text(s)).norm() > 1e-3);
  }

  TEST_CASE("DET mode yields 100 well-formed triplets") {
    const ModelConfig cfg = ModelConfig::toy();
    const SiaModel model(cfg);
    const auto triplets = model.encode_video(noise_clip(1, cfg));
    REQUIRE(triplets.size() == 100);
    for (const auto& t : triplets) {
      CHECK(t.box.cx > 0.0);
      CHECK(t.box.cx < 1.0);
      CHECK(t.box.w > 0.0);
      CHECK(t.box.h < 1.0);
      CHECK(t.p_act >= 0.0);
      CHECK(t.p_act <= 1.0);
      CHECK(t.embedding.size() == cfg.embed_dim);
      CHECK(t.embedding.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("PATCH mode yields one output per spatial position") {
    ModelConfig cfg = ModelConfig::toy();
    cfg.mode = RegressionMode::kPatch;
    const SiaModel model(cfg);
    CHECK(model.encode_video(noise_clip(1, cfg)).size() == 16);
    CHECK(cfg.num_outputs() == 16);
  }

  TEST_CASE("outputs depend on pixels and reject wrong shapes") {
    const ModelConfig cfg = ModelConfig::toy();
    const SiaModel model(cfg);
    Clip clip = noise_clip(2, cfg);
    const auto before = model.encode_video(clip);
    clip.at(1, 5, 5, 0) += 0.5f;
    const auto after = model.encode_video(clip);
    CHECK((before[0].embedding - after[0].embedding).norm() > 0.0);
    CHECK_THROWS_AS(model.forward_video(Clip(cfg.frames + 1, cfg.image_size, cfg.image_size)), ConfigError);
  }

  TEST_CASE("swapping two detection tokens swaps their outputs") {
    const ModelConfig cfg = ModelConfig::toy();
    SiaModel model(cfg);
    const Clip clip = noise_clip(3, cfg);
    const auto before = model.encode_video(clip);
    auto& det = model.parameters().entries();
    for (auto& p : det) {
      if (p.path == "video.det_tokens") p.var.mutable_value().row(3).swap(p.var.mutable_value().row(71));
    }
    const auto after = model.encode_video(clip);
    for (std::size_t i = 0; i < before.size(); ++i) {
      const std::size_t j = i == 3 ? 71 : i == 71 ? 3 : i;
      CHECK(std::abs(before[i].p_act - after[j].p_act) <= 1e-12);
      CHECK(std::abs(before[i].box.cx - after[j].box.cx) <= 1e-12);
      CHECK((before[i].embedding - after[j].embedding).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("adapters start as the identity and move the encoder once trained") {
    SiaModel model(ModelConfig::toy());
    CHECK(model.encode_text("person riding a horse") == model.encode_text_base("person riding a horse"));
    REQUIRE_FALSE(model.adapters().empty());
    model.adapters()[0].up.mutable_value().setConstant(0.05);
    CHECK((model.encode_text("person riding a horse") - model.encode_text_base("person riding a horse")).norm() > 1e-6);
  }

  TEST_CASE("text weights version tracks text parameters only") {
    SiaModel model(ModelConfig::toy());
    const auto v0 = model.text_weights_version();
    for (auto& p : model.parameters().entries()) {
      if (p.path == "video.det_tokens") p.var.mutable_value()(0, 0) += 1.0;
    }
    CHECK(model.text_weights_version() == v0);
    model.adapters()[0].up.mutable_value()(0, 0) = 0.1;
    CHECK(model.text_weights_version() != v0);
  }

  TEST_CASE("score_actions matches a direct computation") {
    const SiaModel model(ModelConfig::toy());
    const auto triplets = model.encode_video(noise_clip(4, model.config()));
    DescriptorBank bank({{"a", "bb"}, {"ccc"}, {"d", "e", "f"}});
    bank.cache_embeddings([&](const std::string& s) { return model.encode_text(s); }, model.text_weights_version());
    const double thr = 0.3;
    const auto scored = score_actions(triplets, bank, thr, 7.0);
    std::size_t expected = 0;
    for (const auto& t : triplets) expected += t.p_act > thr;
    REQUIRE(scored.size() == expected);
    for (const auto& d : scored) {
      const auto& t = triplets[d.token];
      for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const auto& s : bank.descriptors(static_cast<ActionId>(c))) mean += t.embedding.dot(model.encode_text(s));
        mean /= static_cast<double>(bank.descriptors(static_cast<ActionId>(c)).size());
        CHECK(d.scores[c] == doctest::Approx(t.p_act / (1.0 + std::exp(-7.0 * mean))).epsilon(1e-12));
      }
    }
    CHECK_THROWS_AS(score_actions(triplets, DescriptorBank({{"x"}}), thr, 1.0), LookupError);
  }

  TEST_CASE("frozen weights get no gradient and adapters do") {
    ModelConfig cfg = ModelConfig::toy();
    cfg.logit_scale_init = 10.0;
    SiaModel model(cfg);
    // Open the adapters so that gradients reach their down projections.
    for (auto& a : model.adapters()) a.up.mutable_value().setConstant(0.01);
    const auto sample = test::toy_sample(11);
    const auto loss = test::toy_loss(model, sample);
    model.parameters().zero_grad();
    ad::backward(loss());
    bool adapter_moved = false;
    for (const auto& p : model.parameters().entries()) {
      if (!p.trainable) {
        CHECK_MESSAGE(p.var.grad().isZero(), p.path);
      } else if (p.path.find("lora_") != std::string::npos) {
        adapter_moved = adapter_moved || !p.var.grad().isZero();
      }
    }
    CHECK(adapter_moved);
  }

  TEST_CASE("frozen text tower exposes only adapters as trainable text weights") {
    const SiaModel model(ModelConfig::toy());
    for (const auto& p : model.parameters().entries()) {
      if (p.path.rfind("text.", 0) == 0) CHECK(p.trainable == (p.path.find("lora_") != std::string::npos));
    }
    ModelConfig frozen = ModelConfig::toy();
    frozen.text_frozen = true;
    const SiaModel f(frozen);
    for (const auto& p : f.parameters().entries()) {
      if (p.path.rfind("text.", 0) == 0) CHECK_FALSE(p.trainable);
    }
  }

  TEST_CASE("analytic gradients agree with finite differences") {
    ModelConfig cfg = ModelConfig::toy();
    cfg.logit_scale_init = 10.0;
    SiaModel model(cfg);
    for (auto& a : model.adapters()) a.up.mutable_value().setConstant(0.01);
    const auto sample = test::toy_sample(12);
    GradientCheckOptions opts;
    opts.samples = 40;
    const auto result = gradient_check(model.parameters(), test::toy_loss(model, sample), opts);
    CHECK(result.checked == 40);
    CHECK_MESSAGE(result.max_relative_error < 1e-3, result.worst_parameter);
  }
}

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sia/checkpoint.hpp"
#include "sia/errors.hpp"
#include "support/temp_dir.hpp"

using namespace sia;

TEST_SUITE("checkpoint") {
  TEST_CASE("model round trip is bit exact") {
    test::TempDir dir;
    ModelConfig cfg = ModelConfig::toy();
    cfg.init_seed = 5;
    SiaModel model(cfg);
    model.adapters()[1].up.mutable_value().setConstant(0.125 / 3.0);
    save_model(dir.file("m.ckpt"), model, {{"step", 3}});
    const SiaModel back = load_model(dir.file("m.ckpt"));
    REQUIRE(back.parameters().entries().size() == model.parameters().entries().size());
    for (std::size_t i = 0; i < back.parameters().entries().size(); ++i) {
      CHECK(back.parameters().entries()[i].var.value() == model.parameters().entries()[i].var.value());
    }
    CHECK(back.config().hash() == cfg.hash());
    CHECK(read_checkpoint(dir.file("m.ckpt")).meta["step"] == 3);
  }

  TEST_CASE("mismatched or corrupt checkpoints are rejected") {
    test::TempDir dir;
    const SiaModel model(ModelConfig::toy());
    save_model(dir.file("m.ckpt"), model);
    ModelConfig other = ModelConfig::toy();
    other.video_layers = 3;
    CHECK_THROWS_AS(load_model(dir.file("m.ckpt"), &other), ConfigError);
    CHECK_THROWS_AS(load_model(dir.file("none.ckpt")), IoError);

    std::ifstream in(dir.file("m.ckpt"), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string original = ss.str();
    std::string bytes = original;
    // Flip the stored layer count in the header without updating its hash.
    const auto pos = bytes.find("\"video_layers\":2");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 15] = '3';
    std::ofstream(dir.file("tampered.ckpt"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_checkpoint(dir.file("tampered.ckpt")), ConfigError);

    std::ofstream(dir.file("junk.ckpt"), std::ios::binary) << "not a checkpoint";
    CHECK_THROWS_AS(read_checkpoint(dir.file("junk.ckpt")), IoError);
    std::ofstream(dir.file("short.ckpt"), std::ios::binary) << original.substr(0, original.size() - 100);
    CHECK_THROWS_AS(read_checkpoint(dir.file("short.ckpt")), IoError);
  }

  TEST_CASE("single precision tensors load") {
    test::TempDir dir;
    const SiaModel model(ModelConfig::toy());
    write_checkpoint(dir.file("f32.ckpt"), model.config(), model_tensors(model), {}, TensorDType::kF32);
    const SiaModel back = load_model(dir.file("f32.ckpt"));
    for (std::size_t i = 0; i < back.parameters().entries().size(); ++i) {
      const auto& a = back.parameters().entries()[i].var.value();
      const auto& b = model.parameters().entries()[i].var.value();
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, b.cwiseAbs().maxCoeff()));
    }
  }

  TEST_CASE("missing tensors are reported") {
    test::TempDir dir;
    const SiaModel model(ModelConfig::toy());
    auto tensors = model_tensors(model);
    tensors.pop_back();
    write_checkpoint(dir.file("p.ckpt"), model.config(), tensors, {});
    CHECK_THROWS_AS(load_model(dir.file("p.ckpt")), ConfigError);
  }
}

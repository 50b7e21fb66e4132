// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sia/model.hpp"

namespace sia {

// Container layout: magic "SIACKPT1", u64 header length, JSON header
// {format_version, config, config_hash, tensors: [{path, dtype, rows, cols,
// offset}], meta}, then the raw little-endian tensor payload. Tensors are
// row-major; dtype is "f64" (written) or "f32" (accepted on load).

enum class TensorDType { kF64, kF32 };

struct NamedTensor {
  std::string path;
  Eigen::MatrixXd value;
};

struct CheckpointData {
  ModelConfig config;
  std::uint64_t config_hash = 0;
  std::vector<NamedTensor> tensors;
  nlohmann::ordered_json meta;

  const Eigen::MatrixXd* find(const std::string& path) const;
};

void write_checkpoint(const std::string& path, const ModelConfig& config,
                      const std::vector<NamedTensor>& tensors, const nlohmann::ordered_json& meta,
                      TensorDType dtype = TensorDType::kF64);
/// Throws ConfigError when the stored config does not match its hash, or
/// when `expected` is given and its hash differs.
CheckpointData read_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

std::vector<NamedTensor> model_tensors(const SiaModel& model);
/// Copies stored parameter values into `model`; every model parameter must be
/// present with the right shape.
void assign_parameters(SiaModel& model, const CheckpointData& data);

void save_model(const std::string& path, const SiaModel& model,
                const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
SiaModel load_model(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace sia

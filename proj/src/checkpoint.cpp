// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sia/errors.hpp"

namespace sia {
namespace {

constexpr char kMagic[8] = {'S', 'I', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << v;
  return ss.str();
}

}  // namespace

const Eigen::MatrixXd* CheckpointData::find(const std::string& path) const {
  for (const auto& t : tensors) {
    if (t.path == path) return &t.value;
  }
  return nullptr;
}

void write_checkpoint(const std::string& path, const ModelConfig& config,
                      const std::vector<NamedTensor>& tensors, const nlohmann::ordered_json& meta,
                      TensorDType dtype) {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config.to_json();
  header["config_hash"] = hex64(config.hash());
  auto& list = header["tensors"] = nlohmann::ordered_json::array();
  const std::size_t elem = dtype == TensorDType::kF64 ? 8 : 4;
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    list.push_back({{"path", t.path},
                    {"dtype", dtype == TensorDType::kF64 ? "f64" : "f32"},
                    {"rows", t.value.rows()},
                    {"cols", t.value.cols()},
                    {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size()) * elem;
  }
  header["meta"] = meta.is_null() ? nlohmann::ordered_json::object() : meta;
  const std::string text = header.dump();

  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        if (dtype == TensorDType::kF64) {
          const double v = t.value(r, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        } else {
          const float v = static_cast<float>(t.value(r, c));
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("'" + path + "' is not a checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 32)) throw IoError("'" + path + "' has a corrupt header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("'" + path + "' is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': corrupt header: " + e.what());
  }
  if (header.value("format_version", 0) != kFormatVersion) {
    throw ConfigError("'" + path + "': unsupported checkpoint format version");
  }

  CheckpointData data;
  data.config = ModelConfig::from_json(header.at("config"));
  const std::string stored_hash = header.at("config_hash").get<std::string>();
  if (stored_hash != hex64(data.config.hash())) {
    throw ConfigError("'" + path + "': config hash mismatch (stored " + stored_hash + ")");
  }
  data.config_hash = data.config.hash();
  if (expected != nullptr && expected->hash() != data.config_hash) {
    throw ConfigError("'" + path + "': checkpoint config " + stored_hash +
                      " does not match the expected config " + hex64(expected->hash()));
  }
  data.meta = header.value("meta", nlohmann::json::object());

  const auto payload_start = in.tellg();
  for (const auto& t : header.at("tensors")) {
    NamedTensor nt;
    nt.path = t.at("path").get<std::string>();
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const std::string dtype = t.at("dtype").get<std::string>();
    if (rows < 0 || cols < 0) throw IoError("'" + path + "': negative tensor shape");
    nt.value.resize(rows, cols);
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (dtype == "f64") {
          double v = 0.0;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          nt.value(r, c) = v;
        } else if (dtype == "f32") {
          float v = 0.0f;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          nt.value(r, c) = v;
        } else {
          throw IoError("'" + path + "': unknown dtype '" + dtype + "'");
        }
      }
    }
    if (!in) throw IoError("'" + path + "': truncated tensor '" + nt.path + "'");
    data.tensors.push_back(std::move(nt));
  }
  return data;
}

std::vector<NamedTensor> model_tensors(const SiaModel& model) {
  std::vector<NamedTensor> out;
  for (const auto& p : model.parameters().entries()) out.push_back({p.path, p.var.value()});
  return out;
}

void assign_parameters(SiaModel& model, const CheckpointData& data) {
  for (auto& p : model.parameters().entries()) {
    const Eigen::MatrixXd* v = data.find(p.path);
    if (v == nullptr) throw ConfigError("checkpoint lacks parameter '" + p.path + "'");
    if (v->rows() != p.var.rows() || v->cols() != p.var.cols()) {
      throw ConfigError("checkpoint parameter '" + p.path + "' has the wrong shape");
    }
    p.var.mutable_value() = *v;
  }
}

void save_model(const std::string& path, const SiaModel& model, const nlohmann::ordered_json& meta) {
  write_checkpoint(path, model.config(), model_tensors(model), meta);
}

SiaModel load_model(const std::string& path, const ModelConfig* expected) {
  const CheckpointData data = read_checkpoint(path, expected);
  SiaModel model(data.config);
  assign_parameters(model, data);
  return model;
}

}  // namespace sia

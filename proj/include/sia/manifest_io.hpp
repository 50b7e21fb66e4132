// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "sia/data.hpp"
#include "sia/vocab.hpp"

namespace sia {

inline constexpr int kManifestSchemaVersion = 1;

nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);
/// Key order of provenance objects is kept, so reserialization is byte stable.
DatasetManifest manifest_from_json(const nlohmann::ordered_json& doc);

/// Serialized manifest text (stable key order, trailing newline).
std::string dump_manifest(const DatasetManifest& manifest);

nlohmann::json read_json_file(const std::string& path);
nlohmann::ordered_json read_ordered_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

/// Root against which manifest-relative paths resolve: $SIA_DATA_DIR when
/// set, else the directory containing the manifest.
std::string data_root_for(const std::string& manifest_path);
std::string resolve_data_path(const std::string& manifest_path, const std::string& relative);

ActionVocabulary load_vocabulary(const std::string& path);
/// Vocabulary named by the manifest's `vocabulary_ref`.
ActionVocabulary load_manifest_vocabulary(const std::string& manifest_path,
                                          const DatasetManifest& manifest);
/// Descriptor bank file, or class names when `path` is empty.
DescriptorBank load_bank_file(const std::string& path, const ActionVocabulary& vocab);

}  // namespace sia

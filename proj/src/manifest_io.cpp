// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/manifest_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sia/errors.hpp"

namespace sia {
namespace {

namespace fs = std::filesystem;

nlohmann::ordered_json sets_to_json(const std::vector<ActionSet>& sets) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : sets) arr.push_back(std::vector<ActionId>(s.begin(), s.end()));
  return arr;
}

std::vector<ActionSet> sets_from_json(const nlohmann::ordered_json& arr) {
  std::vector<ActionSet> out;
  for (const auto& s : arr) {
    ActionSet set;
    for (const auto& a : s) set.insert(a.get<ActionId>());
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace

nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["vocabulary_ref"] = manifest.vocabulary_ref;
  if (!manifest.provenance.is_null()) j["provenance"] = manifest.provenance;
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json je;
    je["clip_id"] = e.clip_id;
    je["frames"] = e.frames;
    je["keyframe"] = e.source_keyframe;
    auto& boxes = je["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : e.annotation.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    je["actions"] = sets_to_json(e.annotation.action_sets);
    if (!e.annotation.person_ids.empty()) {
      auto& persons = je["person_ids"] = nlohmann::ordered_json::array();
      for (const auto& p : e.annotation.person_ids) {
        persons.push_back(p ? nlohmann::ordered_json(*p) : nlohmann::ordered_json(nullptr));
      }
    }
    je["global_action"] = e.annotation.global_action ? nlohmann::ordered_json(*e.annotation.global_action)
                                                     : nlohmann::ordered_json(nullptr);
    if (!e.pseudo_actions.empty()) je["pseudo_actions"] = sets_to_json(e.pseudo_actions);
    if (!e.provenance.is_null()) je["provenance"] = e.provenance;
    entries.push_back(std::move(je));
  }
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object() || !doc.contains("entries")) throw ValidationError("manifest lacks 'entries'");
  if (doc.contains("schema_version") && doc.at("schema_version").get<int>() > kManifestSchemaVersion) {
    throw ValidationError("manifest schema version " + doc.at("schema_version").dump() + " is newer than supported");
  }
  DatasetManifest m;
  m.vocabulary_ref = doc.value("vocabulary_ref", std::string());
  if (doc.contains("provenance")) m.provenance = doc.at("provenance");
  for (const auto& je : doc.at("entries")) {
    ManifestEntry e;
    e.clip_id = je.at("clip_id").get<std::string>();
    e.frames = je.value("frames", std::string());
    e.source_keyframe = je.value("keyframe", 0);
    e.annotation.clip_id = e.clip_id;
    for (const auto& b : je.at("boxes")) {
      if (!b.is_array() || b.size() != 4) throw ValidationError(e.clip_id + ": box must have 4 coordinates");
      e.annotation.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    e.annotation.action_sets = sets_from_json(je.at("actions"));
    if (je.contains("person_ids")) {
      for (const auto& p : je.at("person_ids")) {
        e.annotation.person_ids.push_back(p.is_null() ? std::optional<int>() : std::optional<int>(p.get<int>()));
      }
    }
    if (je.contains("global_action") && !je.at("global_action").is_null()) {
      e.annotation.global_action = je.at("global_action").get<ActionId>();
    }
    if (je.contains("pseudo_actions")) e.pseudo_actions = sets_from_json(je.at("pseudo_actions"));
    if (je.contains("provenance")) e.provenance = je.at("provenance");
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

std::string dump_manifest(const DatasetManifest& manifest) {
  return manifest_to_json(manifest).dump(1) + "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what(), 0);
  }
}

nlohmann::ordered_json read_ordered_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what(), 0);
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetManifest load_manifest(const std::string& path) {
  try {
    return manifest_from_json(read_ordered_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  write_text_file(path, dump_manifest(manifest));
}

std::string data_root_for(const std::string& manifest_path) {
  if (const char* env = std::getenv("SIA_DATA_DIR"); env != nullptr && *env != '\0') return env;
  const fs::path parent = fs::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

std::string resolve_data_path(const std::string& manifest_path, const std::string& relative) {
  const fs::path rel(relative);
  if (rel.is_absolute()) return rel.string();
  return (fs::path(data_root_for(manifest_path)) / rel).string();
}

ActionVocabulary load_vocabulary(const std::string& path) {
  try {
    return ActionVocabulary::from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

ActionVocabulary load_manifest_vocabulary(const std::string& manifest_path, const DatasetManifest& manifest) {
  if (manifest.vocabulary_ref.empty()) throw ValidationError("manifest has no vocabulary_ref");
  return load_vocabulary(resolve_data_path(manifest_path, manifest.vocabulary_ref));
}

DescriptorBank load_bank_file(const std::string& path, const ActionVocabulary& vocab) {
  if (path.empty()) return class_name_bank(vocab);
  try {
    return load_descriptor_bank(read_json_file(path), vocab);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

}  // namespace sia

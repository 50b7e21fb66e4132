// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/vocab.hpp"

#include <algorithm>

#include "sia/errors.hpp"

namespace sia {

ActionVocabulary::ActionVocabulary(std::vector<ActionClass> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != static_cast<ActionId>(i)) {
      throw ValidationError("vocabulary ids must be dense from 0; found id " +
                            std::to_string(classes_[i].id) + " at position " + std::to_string(i));
    }
    if (classes_[i].name.empty()) throw ValidationError("vocabulary class with empty name");
    if (!by_name_.emplace(classes_[i].name, classes_[i].id).second) {
      throw ValidationError("duplicate class name '" + classes_[i].name + "'");
    }
  }
}

ActionVocabulary ActionVocabulary::from_names(const std::vector<std::string>& names) {
  std::vector<ActionClass> classes;
  classes.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    classes.push_back({static_cast<ActionId>(i), names[i]});
  }
  return ActionVocabulary(std::move(classes));
}

ActionVocabulary ActionVocabulary::from_json(const nlohmann::json& doc) {
  if (!doc.contains("classes")) throw ValidationError("vocabulary document lacks 'classes'");
  std::vector<ActionClass> classes;
  for (const auto& c : doc.at("classes")) {
    classes.push_back({c.at("id").get<ActionId>(), c.at("name").get<std::string>()});
  }
  std::sort(classes.begin(), classes.end(),
            [](const ActionClass& a, const ActionClass& b) { return a.id < b.id; });
  return ActionVocabulary(std::move(classes));
}

nlohmann::ordered_json ActionVocabulary::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  auto& arr = doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes_) arr.push_back({{"id", c.id}, {"name", c.name}});
  return doc;
}

const std::string& ActionVocabulary::name_of(ActionId id) const {
  if (!contains(id)) throw LookupError("unknown action id " + std::to_string(id));
  return classes_[static_cast<std::size_t>(id)].name;
}

ActionId ActionVocabulary::id_of(const std::string& name) const {
  const auto id = find(name);
  if (!id) throw LookupError("unknown action class '" + name + "'");
  return *id;
}

std::optional<ActionId> ActionVocabulary::find(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

DescriptorBank::DescriptorBank(std::vector<std::vector<std::string>> descriptors)
    : descriptors_(std::move(descriptors)) {
  for (std::size_t c = 0; c < descriptors_.size(); ++c) {
    if (descriptors_[c].empty()) {
      throw ValidationError("class " + std::to_string(c) + " has no descriptors");
    }
  }
}

const std::vector<std::string>& DescriptorBank::descriptors(ActionId class_id) const {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= descriptors_.size()) {
    throw LookupError("descriptor bank has no class " + std::to_string(class_id));
  }
  return descriptors_[static_cast<std::size_t>(class_id)];
}

void DescriptorBank::cache_embeddings(const TextEncoderFn& encode, std::uint64_t weights_version) {
  if (cached_version_ && *cached_version_ == weights_version) return;
  // Identical strings across classes are encoded once.
  std::map<std::string, Eigen::VectorXd> memo;
  std::vector<std::vector<Eigen::VectorXd>> embeddings(descriptors_.size());
  for (std::size_t c = 0; c < descriptors_.size(); ++c) {
    for (const auto& text : descriptors_[c]) {
      auto it = memo.find(text);
      if (it == memo.end()) it = memo.emplace(text, encode(text)).first;
      embeddings[c].push_back(it->second);
    }
  }
  embeddings_ = std::move(embeddings);
  cached_version_ = weights_version;
}

const std::vector<Eigen::VectorXd>& DescriptorBank::embeddings(ActionId class_id) const {
  if (!cached_version_) throw LookupError("descriptor embeddings are not cached");
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= embeddings_.size()) {
    throw LookupError("descriptor bank has no class " + std::to_string(class_id));
  }
  return embeddings_[static_cast<std::size_t>(class_id)];
}

const std::string& sample_training_descriptor(const DescriptorBank& bank, ActionId class_id,
                                              std::mt19937_64& rng) {
  const auto& list = bank.descriptors(class_id);
  std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
  return list[pick(rng)];
}

double averaged_similarity(const Eigen::VectorXd& visual,
                           std::span<const Eigen::VectorXd> class_embeddings) {
  if (class_embeddings.empty()) throw ArgumentError("averaged_similarity: no descriptor embeddings");
  double sum = 0.0;
  for (const auto& e : class_embeddings) {
    if (e.size() != visual.size()) throw ArgumentError("averaged_similarity: dimension mismatch");
    sum += visual.dot(e);
  }
  return sum / static_cast<double>(class_embeddings.size());
}

DescriptorBank load_descriptor_bank(const nlohmann::json& doc, const ActionVocabulary& vocab) {
  if (!doc.is_object() || !doc.contains("version")) {
    throw ValidationError("descriptor bank document requires a 'version' field");
  }
  if (!doc.contains("descriptors") || !doc.at("descriptors").is_object()) {
    throw ValidationError("descriptor bank document requires a 'descriptors' object");
  }
  const auto& table = doc.at("descriptors");
  std::vector<std::string> missing;
  std::vector<std::vector<std::string>> descriptors(vocab.size());
  for (const auto& cls : vocab.classes()) {
    if (!table.contains(cls.name)) {
      missing.push_back(cls.name);
      continue;
    }
    const auto& list = table.at(cls.name);
    if (!list.is_array()) throw ValidationError("descriptors of '" + cls.name + "' must be a list");
    for (const auto& s : list) descriptors[static_cast<std::size_t>(cls.id)].push_back(s.get<std::string>());
    if (descriptors[static_cast<std::size_t>(cls.id)].empty()) {
      throw ValidationError("class '" + cls.name + "' has an empty descriptor list");
    }
  }
  if (!missing.empty()) {
    std::string msg = "descriptor bank is missing classes:";
    for (const auto& name : missing) msg += " '" + name + "'";
    throw ValidationError(msg);
  }
  return DescriptorBank(std::move(descriptors));
}

std::string class_name_prompt(const std::string& class_name) {
  std::string s = class_name;
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

DescriptorBank class_name_bank(const ActionVocabulary& vocab) {
  std::vector<std::vector<std::string>> descriptors;
  for (const auto& cls : vocab.classes()) descriptors.push_back({class_name_prompt(cls.name)});
  return DescriptorBank(std::move(descriptors));
}

nlohmann::ordered_json descriptor_bank_to_json(const DescriptorBank& bank,
                                               const ActionVocabulary& vocab,
                                               const std::string& version) {
  nlohmann::ordered_json doc;
  doc["version"] = version;
  auto& table = doc["descriptors"] = nlohmann::ordered_json::object();
  for (const auto& cls : vocab.classes()) table[cls.name] = bank.descriptors(cls.id);
  return doc;
}

}  // namespace sia

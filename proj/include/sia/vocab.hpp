// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace sia {

using ActionId = int;

struct ActionClass {
  ActionId id = 0;
  std::string name;
};

/// Ordered action classes with dense ids starting at 0 and unique names.
class ActionVocabulary {
 public:
  ActionVocabulary() = default;
  /// Validates density and uniqueness; throws ValidationError.
  explicit ActionVocabulary(std::vector<ActionClass> classes);

  static ActionVocabulary from_names(const std::vector<std::string>& names);
  static ActionVocabulary from_json(const nlohmann::json& doc);
  nlohmann::ordered_json to_json() const;

  std::size_t size() const { return classes_.size(); }
  const std::vector<ActionClass>& classes() const { return classes_; }
  bool contains(ActionId id) const { return id >= 0 && static_cast<std::size_t>(id) < classes_.size(); }
  const std::string& name_of(ActionId id) const;
  ActionId id_of(const std::string& name) const;
  std::optional<ActionId> find(const std::string& name) const;

 private:
  std::vector<ActionClass> classes_;
  std::map<std::string, ActionId> by_name_;
};

/// Descriptor strings per class plus an optional cache of unit-norm text
/// embeddings, keyed by the text encoder weights version that produced them.
class DescriptorBank {
 public:
  DescriptorBank() = default;
  explicit DescriptorBank(std::vector<std::vector<std::string>> descriptors);

  std::size_t num_classes() const { return descriptors_.size(); }
  const std::vector<std::string>& descriptors(ActionId class_id) const;

  using TextEncoderFn = std::function<Eigen::VectorXd(const std::string&)>;
  /// Encodes every descriptor once. A second call with the same version is a
  /// no-op; a different version re-encodes.
  void cache_embeddings(const TextEncoderFn& encode, std::uint64_t weights_version);
  bool has_embeddings() const { return cached_version_.has_value(); }
  std::optional<std::uint64_t> embeddings_version() const { return cached_version_; }
  /// Cached embeddings of one class; throws LookupError when not cached.
  const std::vector<Eigen::VectorXd>& embeddings(ActionId class_id) const;

 private:
  std::vector<std::vector<std::string>> descriptors_;
  std::vector<std::vector<Eigen::VectorXd>> embeddings_;
  std::optional<std::uint64_t> cached_version_;
};

inline constexpr std::size_t kDefaultDescriptorsPerClass = 16;

/// Uniform draw among the class's descriptors.
const std::string& sample_training_descriptor(const DescriptorBank& bank, ActionId class_id,
                                              std::mt19937_64& rng);

/// Mean of the per-descriptor cosine similarities (dot products of unit vectors).
double averaged_similarity(const Eigen::VectorXd& visual,
                           std::span<const Eigen::VectorXd> class_embeddings);

/// Parses `{"version": ..., "descriptors": {class name: [strings]}}`.
DescriptorBank load_descriptor_bank(const nlohmann::json& doc, const ActionVocabulary& vocab);

/// One descriptor per class: the class name with underscores as spaces.
DescriptorBank class_name_bank(const ActionVocabulary& vocab);
std::string class_name_prompt(const std::string& class_name);

nlohmann::ordered_json descriptor_bank_to_json(const DescriptorBank& bank,
                                               const ActionVocabulary& vocab,
                                               const std::string& version);

}  // namespace sia

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>
#include <sstream>

#include "sia/checkpoint.hpp"
#include "sia/errors.hpp"
#include "sia/geometry.hpp"
#include "sia/log.hpp"
#include "sia/manifest_io.hpp"
#include "sia/matching.hpp"

namespace sia {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!doc.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : doc.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (!known) throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

template <typename T>
void read_field(const json& doc, const char* key, T& field, const std::string& section) {
  if (!doc.contains(key)) return;
  try {
    field = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + section + "." + key + "' has the wrong type");
  }
}

std::string join_path(const fs::path& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

bool all_finite(const LossBreakdown& b) {
  return std::isfinite(b.actor_term) && std::isfinite(b.box_term) && std::isfinite(b.action_term) &&
         std::isfinite(b.total);
}

ordered_json loss_json(const LossBreakdown& b) {
  ordered_json j;
  j["actor"] = b.actor_term;
  j["box"] = b.box_term;
  j["action"] = b.action_term;
  j["total"] = b.total;
  return j;
}

/// Drops `blocked` labels; boxes left without labels disappear.
void apply_blocklist(LoadedDataset& data, const std::set<ActionId>& blocked) {
  if (blocked.empty()) return;
  apply_class_blocklist(data.annotations, blocked);
  apply_class_blocklist(data.targets, blocked);
}

}  // namespace

void RunConfig::validate() const {
  if (version != kRunConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }
  model.validate();
  if (data.frames != model.frames) {
    throw ConfigError("data.frames (" + std::to_string(data.frames) + ") must equal model.frames (" +
                      std::to_string(model.frames) + ")");
  }
  if (data.stride < 1) throw ConfigError("data.stride must be positive");
  if (!data.synthetic && data.manifest.empty()) {
    throw ConfigError("data needs either a manifest path or a synthetic section");
  }
  if (data.synthetic) {
    data.synthetic->validate();
    if (data.synthetic_clips < 1) throw ConfigError("data.synthetic_clips must be at least 1");
    if (data.synthetic->frames != model.frames || data.synthetic->height != model.image_size ||
        data.synthetic->width != model.image_size) {
      throw ConfigError("synthetic clip shape does not match the model config");
    }
  }
  if (!(optim.learning_rate > 0.0)) throw ConfigError("optim.learning_rate must be positive");
  if (optim.steps < 0) throw ConfigError("optim.steps must be non-negative");
  if (optim.batch_size < 1) throw ConfigError("optim.batch_size must be positive");
  if (!(optim.grad_clip_norm > 0.0)) throw ConfigError("optim.grad_clip_norm must be positive");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw ConfigError("optim betas must lie in [0, 1)");
  }
  if (!(loss.background_weight >= 0.0)) throw ConfigError("loss.background_weight must be non-negative");
  if (!(eval.iou_threshold > 0.0 && eval.iou_threshold <= 1.0)) {
    throw ConfigError("eval.iou_threshold must lie in (0, 1]");
  }
  if (eval.every < 0) throw ConfigError("eval.every must be non-negative");
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["version"] = version;
  j["model"] = model.to_json();
  auto& d = j["data"];
  d["manifest"] = data.manifest;
  if (data.synthetic) {
    d["synthetic"] = data.synthetic->to_json();
    d["synthetic"]["seed"] = data.synthetic_seed;
    d["synthetic"]["clips"] = data.synthetic_clips;
  } else {
    d["synthetic"] = nullptr;
  }
  d["frames"] = data.frames;
  d["stride"] = data.stride;
  d["class_balanced"] = data.class_balanced;
  d["blocklist"] = data.blocklist;
  auto& l = j["loss"];
  l["actor"] = loss.actor;
  l["box"] = loss.box;
  l["action"] = loss.action;
  l["background_weight"] = loss.background_weight;
  l["negatives"] = negatives == NegativeClasses::kBatch ? "batch" : "vocabulary";
  auto& o = j["optim"];
  o["learning_rate"] = optim.learning_rate;
  o["steps"] = optim.steps;
  o["batch_size"] = optim.batch_size;
  o["seed"] = optim.seed;
  o["cosine_decay"] = optim.cosine_decay;
  o["grad_clip_norm"] = optim.grad_clip_norm;
  o["beta1"] = optim.beta1;
  o["beta2"] = optim.beta2;
  o["epsilon"] = optim.epsilon;
  o["weight_decay"] = optim.weight_decay;
  j["vocab"] = {{"bank", vocab.bank}, {"augment", vocab.augment}};
  auto& e = j["eval"];
  e["iou_threshold"] = eval.iou_threshold;
  e["p_act_threshold"] = eval.p_act_threshold;
  e["every"] = eval.every;
  e["stop_at_map"] = eval.stop_at_map ? ordered_json(*eval.stop_at_map) : ordered_json(nullptr);
  j["output_dir"] = output_dir;
  return j;
}

RunConfig RunConfig::from_json(const json& doc) {
  check_keys(doc, {"version", "model", "data", "loss", "optim", "vocab", "eval", "output_dir"}, "root");
  if (!doc.contains("version")) throw ConfigError("config lacks a version field");
  RunConfig c;
  read_field(doc, "version", c.version, "root");
  if (c.version != kRunConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  if (doc.contains("model")) c.model = ModelConfig::from_json(doc.at("model"));
  c.data.frames = c.model.frames;
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    check_keys(d, {"manifest", "synthetic", "frames", "stride", "class_balanced", "blocklist"}, "data");
    read_field(d, "manifest", c.data.manifest, "data");
    if (d.contains("synthetic") && !d.at("synthetic").is_null()) {
      json s = d.at("synthetic");
      read_field(s, "seed", c.data.synthetic_seed, "data.synthetic");
      read_field(s, "clips", c.data.synthetic_clips, "data.synthetic");
      s.erase("seed");
      s.erase("clips");
      c.data.synthetic = SynthConfig::from_json(s);
    }
    read_field(d, "frames", c.data.frames, "data");
    read_field(d, "stride", c.data.stride, "data");
    read_field(d, "class_balanced", c.data.class_balanced, "data");
    read_field(d, "blocklist", c.data.blocklist, "data");
  }
  if (doc.contains("loss")) {
    const auto& l = doc.at("loss");
    check_keys(l, {"actor", "box", "action", "background_weight", "negatives"}, "loss");
    read_field(l, "actor", c.loss.actor, "loss");
    read_field(l, "box", c.loss.box, "loss");
    read_field(l, "action", c.loss.action, "loss");
    read_field(l, "background_weight", c.loss.background_weight, "loss");
    std::string negatives = "batch";
    read_field(l, "negatives", negatives, "loss");
    if (negatives == "batch") {
      c.negatives = NegativeClasses::kBatch;
    } else if (negatives == "vocabulary") {
      c.negatives = NegativeClasses::kVocabulary;
    } else {
      throw ConfigError("loss.negatives must be \"batch\" or \"vocabulary\"");
    }
  }
  if (doc.contains("optim")) {
    const auto& o = doc.at("optim");
    check_keys(o, {"learning_rate", "steps", "batch_size", "seed", "cosine_decay", "grad_clip_norm", "beta1",
                   "beta2", "epsilon", "weight_decay"},
               "optim");
    read_field(o, "learning_rate", c.optim.learning_rate, "optim");
    read_field(o, "steps", c.optim.steps, "optim");
    read_field(o, "batch_size", c.optim.batch_size, "optim");
    read_field(o, "seed", c.optim.seed, "optim");
    read_field(o, "cosine_decay", c.optim.cosine_decay, "optim");
    read_field(o, "grad_clip_norm", c.optim.grad_clip_norm, "optim");
    read_field(o, "beta1", c.optim.beta1, "optim");
    read_field(o, "beta2", c.optim.beta2, "optim");
    read_field(o, "epsilon", c.optim.epsilon, "optim");
    read_field(o, "weight_decay", c.optim.weight_decay, "optim");
  }
  if (doc.contains("vocab")) {
    const auto& v = doc.at("vocab");
    check_keys(v, {"bank", "augment"}, "vocab");
    read_field(v, "bank", c.vocab.bank, "vocab");
    read_field(v, "augment", c.vocab.augment, "vocab");
  }
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    check_keys(e, {"iou_threshold", "p_act_threshold", "every", "stop_at_map"}, "eval");
    read_field(e, "iou_threshold", c.eval.iou_threshold, "eval");
    read_field(e, "p_act_threshold", c.eval.p_act_threshold, "eval");
    read_field(e, "every", c.eval.every, "eval");
    if (e.contains("stop_at_map") && !e.at("stop_at_map").is_null()) {
      c.eval.stop_at_map = e.at("stop_at_map").get<double>();
    }
  }
  read_field(doc, "output_dir", c.output_dir, "root");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  RunConfig c = from_json(doc);
  const fs::path base = fs::path(path).parent_path();
  c.data.manifest = join_path(base, c.data.manifest);
  c.vocab.bank = join_path(base, c.vocab.bank);
  c.output_dir = join_path(base, c.output_dir);
  return c;
}

LoadedDataset load_dataset(const std::string& manifest_path, int frames, int stride) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  LoadedDataset out;
  out.vocab = load_manifest_vocabulary(manifest_path, manifest);
  for (const auto& e : manifest.entries) {
    e.annotation.validate(&out.vocab);
    const auto source = open_raw_frames(resolve_data_path(manifest_path, e.frames));
    out.clip_ids.push_back(e.clip_id);
    out.clips.push_back(sample_clip_frames(*source, e.source_keyframe, frames, stride));
    out.annotations.push_back(e.annotation);
    KeyframeAnnotation t = e.annotation;
    t.action_sets = e.training_action_sets();
    out.targets.push_back(std::move(t));
  }
  return out;
}

LoadedDataset dataset_from_synthetic(const SyntheticDataset& synth) {
  LoadedDataset out;
  out.vocab = synth.vocab;
  out.clips = synth.clips;
  for (const auto& e : synth.manifest.entries) {
    out.clip_ids.push_back(e.clip_id);
    out.annotations.push_back(e.annotation);
    KeyframeAnnotation t = e.annotation;
    t.action_sets = e.training_action_sets();
    out.targets.push_back(std::move(t));
  }
  return out;
}

LoadedDataset load_training_data(const RunConfig& config) {
  LoadedDataset data =
      config.data.synthetic
          ? dataset_from_synthetic(
                generate_synthetic(config.data.synthetic_seed, config.data.synthetic_clips, *config.data.synthetic))
          : load_dataset(config.data.manifest, config.data.frames, config.data.stride);
  std::set<ActionId> blocked;
  for (const auto& name : config.data.blocklist) {
    const auto id = data.vocab.find(name);
    if (!id) throw ConfigError("blocklisted class '" + name + "' is not in the vocabulary");
    blocked.insert(*id);
  }
  apply_blocklist(data, blocked);
  return data;
}

ordered_json StepMetrics::to_json() const {
  ordered_json j;
  j["step"] = step;
  j["lr"] = learning_rate;
  j["grad_norm"] = grad_norm;
  j["loss"] = loss_json(loss);
  j["running_total"] = running_total;
  return j;
}

Trainer::Trainer(RunConfig config, LoadedDataset data, DescriptorBank bank)
    : config_(std::move(config)),
      data_(std::move(data)),
      bank_(std::move(bank)),
      model_([this] {
        ModelConfig m = config_.model;
        m.init_seed = config_.optim.seed;
        return m;
      }()),
      rng_(config_.optim.seed) {
  config_.validate();
  if (data_.size() == 0) throw ConfigError("training set is empty");
  if (bank_.num_classes() != data_.vocab.size()) {
    throw ConfigError("descriptor bank covers " + std::to_string(bank_.num_classes()) + " classes, vocabulary has " +
                      std::to_string(data_.vocab.size()));
  }
  for (const auto& clip : data_.clips) {
    if (clip.frames != config_.model.frames || clip.height != config_.model.image_size ||
        clip.width != config_.model.image_size) {
      throw ConfigError("training clip shape does not match the model config");
    }
  }
  for (const auto& p : model_.parameters().entries()) {
    adam_m_.push_back(p.trainable ? Eigen::MatrixXd::Zero(p.var.rows(), p.var.cols()) : Eigen::MatrixXd());
    adam_v_.push_back(p.trainable ? Eigen::MatrixXd::Zero(p.var.rows(), p.var.cols()) : Eigen::MatrixXd());
  }
  clips_by_class_.resize(data_.vocab.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    std::set<ActionId> present;
    for (const auto& s : data_.targets[i].action_sets) present.insert(s.begin(), s.end());
    for (ActionId a : present) clips_by_class_[a].push_back(i);
  }
}

double Trainer::learning_rate_at(int step) const {
  const auto& o = config_.optim;
  if (!o.cosine_decay || o.steps <= 0) return o.learning_rate;
  const double t = static_cast<double>(std::min(step, o.steps)) / o.steps;
  return o.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<std::size_t> Trainer::sample_batch() {
  const std::size_t n = data_.size();
  const std::size_t b = std::min<std::size_t>(config_.optim.batch_size, n);
  std::vector<std::size_t> batch;
  if (config_.data.class_balanced) {
    std::vector<ActionId> usable;
    for (std::size_t c = 0; c < clips_by_class_.size(); ++c) {
      if (!clips_by_class_[c].empty()) usable.push_back(static_cast<ActionId>(c));
    }
    if (usable.empty()) throw ConfigError("training set has no labelled boxes");
    std::uniform_int_distribution<std::size_t> pick_class(0, usable.size() - 1);
    while (batch.size() < b) {
      const auto& pool = clips_by_class_[usable[pick_class(rng_)]];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      batch.push_back(pool[pick(rng_)]);
    }
    return batch;
  }
  // Uniform sample without replacement (partial Fisher-Yates).
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng_)]);
  }
  batch.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
  return batch;
}

StepMetrics Trainer::step() {
  const std::vector<std::size_t> batch = sample_batch();

  std::set<ActionId> present;
  for (std::size_t i : batch) {
    for (const auto& s : data_.targets[i].action_sets) present.insert(s.begin(), s.end());
  }
  if (config_.negatives == NegativeClasses::kVocabulary) {
    for (std::size_t c = 0; c < data_.vocab.size(); ++c) present.insert(static_cast<ActionId>(c));
  }
  const std::vector<ActionId> classes(present.begin(), present.end());

  model_.parameters().zero_grad();
  ad::Var text;
  if (!classes.empty()) {
    std::vector<ad::Var> rows;
    for (ActionId c : classes) {
      rows.push_back(model_.forward_text(sample_training_descriptor(bank_, c, rng_)));
    }
    text = ad::concat_rows(rows);
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  ad::Var total;
  LossBreakdown sum;
  auto diverged = [&](const std::string& why) {
    ordered_json dump;
    dump["step"] = step_;
    dump["reason"] = why;
    dump["loss"] = loss_json(sum);
    auto& ids = dump["batch"] = ordered_json::array();
    for (std::size_t i : batch) ids.push_back(data_.clip_ids[i]);
    dump["classes"] = classes;
    std::string where;
    if (!config_.output_dir.empty()) {
      where = (fs::path(config_.output_dir) / ("divergence_step_" + std::to_string(step_) + ".json")).string();
      write_text_file(where, dump.dump(1) + "\n");
    }
    throw DivergenceError("training diverged at step " + std::to_string(step_) + " (" + why + ")" +
                          (where.empty() ? "; batch " + dump["batch"].dump() : "; dump written to " + where));
  };
  for (std::size_t i : batch) {
    const KeyframeAnnotation& gt = data_.targets[i];
    const VideoOutputs out = model_.forward_video(data_.clips[i]);
    const auto triplets = out.triplets();
    if (!out.boxes.value().allFinite() || !out.actor_logits.value().allFinite() ||
        !out.embeddings.value().allFinite()) {
      diverged("non-finite detector output on clip '" + data_.clip_ids[i] + "'");
    }
    const Assignment assignment =
        hungarian(build_match_cost(triplets, gt, config_.loss.actor, config_.loss.box));
    ad::Var logits;
    if (!assignment.pairs.empty() && !classes.empty()) {
      std::vector<Eigen::Index> rows;
      for (const auto& [pred, g] : assignment.pairs) rows.push_back(static_cast<Eigen::Index>(pred));
      logits = ad::scale_by(ad::matmul_nt(ad::gather_rows(out.embeddings, rows), text), model_.logit_scale());
    } else {
      logits = ad::constant(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignment.pairs.size()),
                                                  static_cast<Eigen::Index>(classes.size())));
    }
    const LossGraph g =
        compute_loss_graph(out, logits, gt.boxes, gt.action_sets, classes, assignment, config_.loss);
    const LossBreakdown v = g.values();
    sum.actor_term += v.actor_term * inv_batch;
    sum.box_term += v.box_term * inv_batch;
    sum.action_term += v.action_term * inv_batch;
    sum.total += v.total * inv_batch;
    const ad::Var scaled = ad::scale(g.total, inv_batch);
    total = total.defined() ? ad::add(total, scaled) : scaled;
  }

  StepMetrics m;
  m.step = step_;
  m.learning_rate = learning_rate_at(step_);
  m.loss = sum;

  if (!all_finite(sum)) diverged("non-finite loss");

  ad::backward(total);

  auto& entries = model_.parameters().entries();
  double sq = 0.0;
  std::vector<Eigen::MatrixXd> grads(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!entries[k].trainable) continue;
    grads[k] = entries[k].var.grad();
    sq += grads[k].squaredNorm();
  }
  m.grad_norm = std::sqrt(sq);
  if (!std::isfinite(m.grad_norm)) diverged("non-finite gradient");
  const double clip = m.grad_norm > config_.optim.grad_clip_norm ? config_.optim.grad_clip_norm / m.grad_norm : 1.0;

  const auto& o = config_.optim;
  const double t = static_cast<double>(step_ + 1);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!entries[k].trainable) continue;
    const Eigen::MatrixXd g = grads[k] * clip;
    adam_m_[k] = o.beta1 * adam_m_[k] + (1.0 - o.beta1) * g;
    adam_v_[k] = o.beta2 * adam_v_[k] + (1.0 - o.beta2) * g.cwiseProduct(g);
    Eigen::MatrixXd& w = entries[k].var.mutable_value();
    const Eigen::MatrixXd update =
        ((adam_m_[k] / c1).array() / ((adam_v_[k] / c2).array().sqrt() + o.epsilon)).matrix();
    if (o.weight_decay > 0.0) w -= m.learning_rate * o.weight_decay * w;
    w -= m.learning_rate * update;
  }
  model_.clamp_logit_scale();
  model_.parameters().zero_grad();

  running_total_ = step_ == 0 ? sum.total : 0.98 * running_total_ + 0.02 * sum.total;
  m.running_total = running_total_;
  ++step_;
  history_.push_back(m);
  return m;
}

std::string Trainer::metrics_log_path() const {
  return config_.output_dir.empty() ? std::string() : (fs::path(config_.output_dir) / "metrics.jsonl").string();
}
std::string Trainer::checkpoint_path() const {
  return config_.output_dir.empty() ? std::string() : (fs::path(config_.output_dir) / "model.ckpt").string();
}
std::string Trainer::state_path() const {
  return config_.output_dir.empty() ? std::string() : (fs::path(config_.output_dir) / "state.ckpt").string();
}

EvalReport Trainer::evaluate_training_set() {
  return evaluate_model(model_, data_, bank_, config_.eval.p_act_threshold, config_.eval.iou_threshold).report;
}

void Trainer::run() {
  std::ofstream log;
  const std::string log_path = metrics_log_path();
  if (!log_path.empty()) {
    fs::create_directories(config_.output_dir);
    log.open(log_path, step_ == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open metrics log '" + log_path + "'");
  }
  while (step_ < config_.optim.steps) {
    const StepMetrics m = step();
    ordered_json rec = m.to_json();
    if (config_.eval.every > 0 && step_ % config_.eval.every == 0) {
      const EvalReport report = evaluate_training_set();
      rec["train_map"] = report.mean_ap;
      if (log.is_open()) log << rec.dump() << '\n';
      log_info("step " + std::to_string(step_) + " loss " + std::to_string(m.loss.total) + " map " +
               std::to_string(report.mean_ap));
      if (config_.eval.stop_at_map && report.mean_ap >= *config_.eval.stop_at_map) break;
      continue;
    }
    if (log.is_open()) log << rec.dump() << '\n';
  }
}

void Trainer::save_state(const std::string& path) const {
  std::vector<NamedTensor> tensors = model_tensors(model_);
  const auto& entries = model_.parameters().entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!entries[k].trainable) continue;
    tensors.push_back({"optim.m." + entries[k].path, adam_m_[k]});
    tensors.push_back({"optim.v." + entries[k].path, adam_v_[k]});
  }
  std::ostringstream rng;
  rng << rng_;
  ordered_json meta;
  meta["kind"] = "train_state";
  meta["step"] = step_;
  meta["rng"] = rng.str();
  meta["running_total"] = running_total_;
  meta["run_config"] = config_.to_json();
  write_checkpoint(path, model_.config(), tensors, meta);
}

void Trainer::load_state(const std::string& path) {
  const CheckpointData data = read_checkpoint(path, &model_.config());
  if (data.meta.value("kind", std::string()) != "train_state") {
    throw ConfigError("'" + path + "' is not a training state file");
  }
  assign_parameters(model_, data);
  const auto& entries = model_.parameters().entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!entries[k].trainable) continue;
    const auto* m = data.find("optim.m." + entries[k].path);
    const auto* v = data.find("optim.v." + entries[k].path);
    if (m == nullptr || v == nullptr) throw ConfigError("state lacks optimizer moments for '" + entries[k].path + "'");
    adam_m_[k] = *m;
    adam_v_[k] = *v;
  }
  step_ = data.meta.at("step").get<int>();
  std::istringstream rng(data.meta.at("rng").get<std::string>());
  rng >> rng_;
  running_total_ = data.meta.at("running_total").get<double>();
  history_.clear();
}

void train(const RunConfig& config, const std::string& resume_state) {
  LoadedDataset data = load_training_data(config);
  DescriptorBank bank;
  if (!config.vocab.augment) {
    bank = class_name_bank(data.vocab);
  } else if (!config.vocab.bank.empty()) {
    bank = load_bank_file(config.vocab.bank, data.vocab);
  } else if (config.data.synthetic) {
    bank = synthetic_descriptor_bank(*config.data.synthetic);
  } else {
    bank = class_name_bank(data.vocab);
  }
  Trainer trainer(config, std::move(data), std::move(bank));
  if (!resume_state.empty()) trainer.load_state(resume_state);
  trainer.run();
  if (!config.output_dir.empty()) {
    write_text_file((fs::path(config.output_dir) / "config.json").string(), config.to_json().dump(2) + "\n");
    ordered_json meta;
    meta["step"] = trainer.current_step();
    save_model(trainer.checkpoint_path(), trainer.model(), meta);
    trainer.save_state(trainer.state_path());
  }
}

std::vector<DetectionRecord> detect(const SiaModel& model, std::span<const Clip> clips,
                                    std::span<const std::string> clip_ids, DescriptorBank& bank,
                                    double p_act_threshold) {
  if (clips.size() != clip_ids.size()) throw ArgumentError("detect: clips and clip ids differ in length");
  bank.cache_embeddings([&model](const std::string& s) { return model.encode_text(s); },
                        model.text_weights_version());
  const double scale = model.logit_scale().item();
  std::vector<DetectionRecord> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto triplets = model.encode_video(clips[i]);
    for (const auto& det : score_actions(triplets, bank, p_act_threshold, scale)) {
      const BoxXYXY box = to_xyxy(det.box);
      for (std::size_t c = 0; c < det.scores.size(); ++c) {
        out.push_back({clip_ids[i], box, static_cast<ActionId>(c), det.scores[c]});
      }
    }
  }
  return out;
}

DatasetEvaluation evaluate_model(const SiaModel& model, const LoadedDataset& data, DescriptorBank& bank,
                                 double p_act_threshold, double iou_threshold) {
  DatasetEvaluation ev;
  ev.detections = detect(model, data.clips, data.clip_ids, bank, p_act_threshold);
  ev.report = evaluate(ev.detections, data.annotations, data.vocab, iou_threshold);
  return ev;
}

ordered_json benchmark(const SiaModel& model, const std::string& suite_path) {
  const json suite = read_json_file(suite_path);
  check_keys(suite, {"version", "frames", "stride", "iou_threshold", "p_act_threshold", "datasets"}, "suite");
  if (suite.value("version", 0) != 1) throw ConfigError("suite file needs \"version\": 1");
  const int frames = suite.value("frames", model.config().frames);
  const int stride = suite.value("stride", 4);
  const double iou_threshold = suite.value("iou_threshold", kDefaultIouThreshold);
  const double p_act_threshold = suite.value("p_act_threshold", 0.5);
  if (!suite.contains("datasets") || !suite.at("datasets").is_array() || suite.at("datasets").empty()) {
    throw ConfigError("suite lists no datasets");
  }
  const fs::path base = fs::path(suite_path).parent_path();

  ordered_json out;
  out["config_hash"] = std::to_string(model.config().hash());
  out["iou_threshold"] = iou_threshold;
  out["p_act_threshold"] = p_act_threshold;
  ordered_json table = ordered_json::object();
  ordered_json reports = ordered_json::object();
  for (const auto& d : suite.at("datasets")) {
    check_keys(d, {"name", "manifest", "bank"}, "suite.datasets");
    const std::string name = d.value("name", std::string());
    if (name.empty()) throw ConfigError("suite dataset without a name");
    if (!d.contains("manifest")) throw ConfigError("dataset '" + name + "' has no manifest");
    if (!d.contains("bank") || d.at("bank").get<std::string>().empty()) {
      throw ConfigError("dataset '" + name + "' has no descriptor bank");
    }
    const std::string manifest_path = join_path(base, d.at("manifest").get<std::string>());
    const std::string bank_path = join_path(base, d.at("bank").get<std::string>());
    if (!fs::exists(bank_path)) throw ConfigError("dataset '" + name + "': bank '" + bank_path + "' not found");
    const LoadedDataset data = load_dataset(manifest_path, frames, stride);
    DescriptorBank bank = load_bank_file(bank_path, data.vocab);
    const DatasetEvaluation ev = evaluate_model(model, data, bank, p_act_threshold, iou_threshold);
    table[name] = ev.report.mean_ap;
    reports[name] = ev.report.to_json();
  }
  out["f_map"] = std::move(table);
  out["datasets"] = std::move(reports);
  return out;
}

BaseNovelSplit split_base_novel(const DatasetManifest& manifest, const ActionVocabulary& vocab, double ratio,
                                std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split ratio must lie strictly between 0 and 1");
  const std::size_t n = vocab.size();
  if (n < 2) throw ArgumentError("splitting needs at least two classes");
  std::vector<ActionId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<ActionId>(i);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  const auto n_base = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(ratio * n)), 1, n - 1);
  BaseNovelSplit out;
  out.base_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_base));
  out.novel_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_base), order.end());
  std::sort(out.base_classes.begin(), out.base_classes.end());
  std::sort(out.novel_classes.begin(), out.novel_classes.end());
  const std::set<ActionId> novel(out.novel_classes.begin(), out.novel_classes.end());
  const std::set<ActionId> base(out.base_classes.begin(), out.base_classes.end());

  out.base.vocabulary_ref = manifest.vocabulary_ref;
  out.novel.vocabulary_ref = manifest.vocabulary_ref;
  auto restrict = [](ManifestEntry e, const std::set<ActionId>& keep) {
    ManifestEntry r = e;
    r.annotation.boxes.clear();
    r.annotation.action_sets.clear();
    r.annotation.person_ids.clear();
    r.pseudo_actions.clear();
    if (r.annotation.global_action && !keep.count(*r.annotation.global_action)) r.annotation.global_action.reset();
    for (std::size_t i = 0; i < e.annotation.boxes.size(); ++i) {
      ActionSet labels, pseudo;
      for (ActionId a : e.annotation.action_sets[i]) {
        if (keep.count(a)) labels.insert(a);
      }
      if (i < e.pseudo_actions.size()) {
        for (ActionId a : e.pseudo_actions[i]) {
          if (keep.count(a)) pseudo.insert(a);
        }
      }
      if (labels.empty() && pseudo.empty()) continue;
      r.annotation.boxes.push_back(e.annotation.boxes[i]);
      r.annotation.action_sets.push_back(std::move(labels));
      if (i < e.annotation.person_ids.size()) r.annotation.person_ids.push_back(e.annotation.person_ids[i]);
      if (!e.pseudo_actions.empty()) r.pseudo_actions.push_back(std::move(pseudo));
    }
    return r;
  };
  for (const auto& e : manifest.entries) {
    const auto labels = e.training_action_sets();
    bool any = false;
    bool only_novel = true;
    for (const auto& s : labels) {
      for (ActionId a : s) {
        any = true;
        if (!novel.count(a)) only_novel = false;
      }
    }
    if (any && only_novel) {
      out.novel.entries.push_back(restrict(e, novel));
    } else {
      out.base.entries.push_back(restrict(e, base));
    }
  }
  return out;
}

ClipLoader manifest_clip_loader(const std::string& manifest_path, int frames, int stride) {
  return [=](const ManifestEntry& e) {
    const auto source = open_raw_frames(resolve_data_path(manifest_path, e.frames));
    return sample_clip_frames(*source, e.source_keyframe, frames, stride);
  };
}

void write_synthetic_dataset(const std::string& dir, const SyntheticDataset& ds,
                             const SynthConfig& config) {
  const std::filesystem::path root(dir);
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const std::filesystem::path p = root / ds.manifest.entries[i].frames;
    std::filesystem::create_directories(p.parent_path());
    write_raw_frames(p.string(), ds.clips[i]);
  }
  write_text_file((root / "vocab.json").string(), ds.vocab.to_json().dump(1) + "\n");
  const DescriptorBank bank = synthetic_descriptor_bank(config);
  write_text_file((root / "bank.json").string(),
                  descriptor_bank_to_json(bank, ds.vocab, "synthetic-1").dump(1) + "\n");
  save_manifest((root / "manifest.json").string(), ds.manifest);

  RunConfig run;
  run.model = ModelConfig::toy();
  run.model.frames = config.frames;
  run.model.image_size = config.height;
  run.data.manifest = "manifest.json";
  run.data.frames = config.frames;
  run.data.stride = 1;
  run.vocab.bank = "bank.json";
  run.optim.learning_rate = 1e-3;
  run.optim.steps = 2000;
  run.output_dir = "run";
  write_text_file((root / "train.json").string(), run.to_json().dump(2) + "\n");
}

}  // namespace sia

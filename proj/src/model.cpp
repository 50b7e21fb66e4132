// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sia/errors.hpp"
#include "sia/log.hpp"
#include "sia/tokenizer.hpp"

namespace sia {
namespace {

using ad::Matrix;
using ad::Var;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

const char* mode_name(RegressionMode m) { return m == RegressionMode::kDet ? "DET" : "PATCH"; }
const char* pooling_name(TextPooling p) { return p == TextPooling::kMean ? "mean" : "last"; }

double logistic(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(image_size, "image_size");
  positive(patch_size, "patch_size");
  positive(frames, "frames");
  positive(video_layers, "video_layers");
  positive(video_width, "video_width");
  positive(video_heads, "video_heads");
  positive(text_layers, "text_layers");
  positive(text_width, "text_width");
  positive(text_heads, "text_heads");
  positive(mlp_ratio, "mlp_ratio");
  positive(embed_dim, "embed_dim");
  positive(lora_rank, "lora_rank");
  if (image_size % patch_size != 0) throw ConfigError("image_size must be divisible by patch_size");
  if (video_width % video_heads != 0) throw ConfigError("video_width must be divisible by video_heads");
  if (text_width % text_heads != 0) throw ConfigError("text_width must be divisible by text_heads");
  if (mode == RegressionMode::kDet && n_det_tokens < 1) {
    throw ConfigError("DET mode requires at least one detection token");
  }
  if (text_context < 3) throw ConfigError("text_context must be at least 3");
  if (!(logit_scale_min > 0.0 && logit_scale_min <= logit_scale_max)) {
    throw ConfigError("invalid logit scale range");
  }
}

int ModelConfig::num_outputs() const {
  return mode == RegressionMode::kDet ? n_det_tokens : patches_per_frame();
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["image_size"] = image_size;
  j["patch_size"] = patch_size;
  j["frames"] = frames;
  j["video_layers"] = video_layers;
  j["video_width"] = video_width;
  j["video_heads"] = video_heads;
  j["text_layers"] = text_layers;
  j["text_width"] = text_width;
  j["text_heads"] = text_heads;
  j["text_context"] = text_context;
  j["text_pooling"] = pooling_name(text_pooling);
  j["mlp_ratio"] = mlp_ratio;
  j["n_det_tokens"] = n_det_tokens;
  j["embed_dim"] = embed_dim;
  j["mode"] = mode_name(mode);
  j["lora_rank"] = lora_rank;
  j["lora_alpha"] = lora_alpha;
  j["text_frozen"] = text_frozen;
  j["logit_scale_init"] = logit_scale_init;
  j["logit_scale_min"] = logit_scale_min;
  j["logit_scale_max"] = logit_scale_max;
  j["det_positional_embedding"] = det_positional_embedding;
  j["init_std"] = init_std;
  j["init_seed"] = init_seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  auto get = [&doc](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("image_size", c.image_size);
  get("patch_size", c.patch_size);
  get("frames", c.frames);
  get("video_layers", c.video_layers);
  get("video_width", c.video_width);
  get("video_heads", c.video_heads);
  get("text_layers", c.text_layers);
  get("text_width", c.text_width);
  get("text_heads", c.text_heads);
  get("text_context", c.text_context);
  if (doc.contains("text_pooling")) {
    const auto p = doc.at("text_pooling").get<std::string>();
    if (p == "mean") {
      c.text_pooling = TextPooling::kMean;
    } else if (p == "last") {
      c.text_pooling = TextPooling::kLast;
    } else {
      throw ConfigError("unknown text pooling '" + p + "'");
    }
  }
  get("mlp_ratio", c.mlp_ratio);
  get("n_det_tokens", c.n_det_tokens);
  get("embed_dim", c.embed_dim);
  if (doc.contains("mode")) {
    const auto m = doc.at("mode").get<std::string>();
    if (m == "DET") {
      c.mode = RegressionMode::kDet;
    } else if (m == "PATCH") {
      c.mode = RegressionMode::kPatch;
    } else {
      throw ConfigError("unknown regression mode '" + m + "'");
    }
  }
  get("lora_rank", c.lora_rank);
  get("lora_alpha", c.lora_alpha);
  get("text_frozen", c.text_frozen);
  get("logit_scale_init", c.logit_scale_init);
  get("logit_scale_min", c.logit_scale_min);
  get("logit_scale_max", c.logit_scale_max);
  get("det_positional_embedding", c.det_positional_embedding);
  get("init_std", c.init_std);
  get("init_seed", c.init_seed);
  c.validate();
  return c;
}

std::uint64_t ModelConfig::hash() const {
  const std::string text = to_json().dump();
  return fnv1a(text.data(), text.size());
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::base16() {
  ModelConfig c;
  c.image_size = 224;
  c.patch_size = 16;
  c.frames = 8;
  c.video_layers = 12;
  c.video_width = 768;
  c.video_heads = 12;
  c.text_layers = 12;
  c.text_width = 512;
  c.text_heads = 8;
  c.text_context = 77;
  c.embed_dim = 768;
  c.init_std = 0.02;
  return c;
}

std::vector<DetectionTriplet> VideoOutputs::triplets() const {
  const Matrix& b = boxes.value();
  const Matrix& logits = actor_logits.value();
  const Matrix& e = embeddings.value();
  std::vector<DetectionTriplet> out(static_cast<std::size_t>(b.rows()));
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    auto& t = out[static_cast<std::size_t>(i)];
    t.box = {b(i, 0), b(i, 1), b(i, 2), b(i, 3)};
    t.p_act = logistic(logits(i, 0) - logits(i, 1));
    t.embedding = e.row(i).transpose();
  }
  return out;
}

Matrix SiaModel::normal(int rows, int cols, double std) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(init_rng_);
  return m;
}

SiaModel::Linear SiaModel::make_linear(const std::string& prefix, int in, int out, bool trainable,
                                       double std) {
  Linear l;
  l.weight = params_.add(prefix + ".weight", normal(in, out, std), trainable);
  l.bias = params_.add(prefix + ".bias", Matrix::Zero(1, out), trainable);
  return l;
}

SiaModel::Block SiaModel::make_block(const std::string& prefix, int width, bool trainable,
                                     bool with_adapters) {
  const int hidden = width * config_.mlp_ratio;
  // Frozen towers stand in for pretrained weights and use fan-in scaling so
  // that attention and MLP paths carry content; trainable ones start small.
  const double s = trainable ? config_.init_std : 1.0 / std::sqrt(static_cast<double>(width));
  const double s_out = trainable ? config_.init_std : 1.0 / std::sqrt(static_cast<double>(hidden));
  Block b;
  b.ln1_gamma = params_.add(prefix + ".ln1.gamma", Matrix::Ones(1, width), trainable);
  b.ln1_beta = params_.add(prefix + ".ln1.beta", Matrix::Zero(1, width), trainable);
  b.qkv = make_linear(prefix + ".attn.qkv", width, 3 * width, trainable, s);
  b.out = make_linear(prefix + ".attn.out", width, width, trainable, s);
  b.ln2_gamma = params_.add(prefix + ".ln2.gamma", Matrix::Ones(1, width), trainable);
  b.ln2_beta = params_.add(prefix + ".ln2.beta", Matrix::Zero(1, width), trainable);
  b.fc1 = make_linear(prefix + ".mlp.fc1", width, hidden, trainable, s);
  b.fc2 = make_linear(prefix + ".mlp.fc2", hidden, width, trainable, s_out);
  if (with_adapters) {
    const bool adapter_trainable = !config_.text_frozen;
    const int r = config_.lora_rank;
    const double scale = config_.lora_alpha / static_cast<double>(r);
    auto add_adapter = [&](const std::string& name, int in, int out) {
      LowRankAdapter a;
      a.down = params_.add(prefix + ".mlp." + name + ".lora_A",
                           normal(r, in, 1.0 / std::sqrt(static_cast<double>(in))),
                           adapter_trainable);
      a.up = params_.add(prefix + ".mlp." + name + ".lora_B", Matrix::Zero(out, r),
                         adapter_trainable);
      a.scale = scale;
      adapters_.push_back(a);
      return static_cast<int>(adapters_.size()) - 1;
    };
    b.fc1_adapter = add_adapter("fc1", width, hidden);
    b.fc2_adapter = add_adapter("fc2", hidden, width);
  }
  return b;
}

SiaModel::SiaModel(const ModelConfig& config) : config_(config), init_rng_(config.init_seed) {
  config_.validate();
  const int d = config_.video_width;
  const int patch_dim = config_.patch_size * config_.patch_size * 3;
  const double s = config_.init_std;

  patch_embed_ = make_linear("video.patch_embed", patch_dim, d, true, s);
  pos_spatial_ = params_.add("video.pos_spatial", normal(config_.patches_per_frame(), d, s), true);
  pos_temporal_ = params_.add("video.pos_temporal", normal(config_.frames, d, s), true);
  if (config_.mode == RegressionMode::kDet) {
    det_tokens_ = params_.add("video.det_tokens", normal(config_.n_det_tokens, d, s), true);
    if (config_.det_positional_embedding) {
      det_pos_ = params_.add("video.det_pos", normal(config_.n_det_tokens, d, s), true);
    }
  }
  for (int l = 0; l < config_.video_layers; ++l) {
    video_blocks_.push_back(make_block("video.blocks." + std::to_string(l), d, true, false));
  }
  video_ln_gamma_ = params_.add("video.ln_final.gamma", Matrix::Ones(1, d), true);
  video_ln_beta_ = params_.add("video.ln_final.beta", Matrix::Zero(1, d), true);
  box_fc0_ = make_linear("head.box.fc0", d, d, true, 1.0 / std::sqrt(static_cast<double>(d)));
  box_fc1_ = make_linear("head.box.fc1", d, d, true, 1.0 / std::sqrt(static_cast<double>(d)));
  box_fc2_ = make_linear("head.box.fc2", d, 4, true, s);
  actor_head_ = make_linear("head.actor", d, 2, true, s);
  embed_head_ = make_linear("head.embed", d, config_.embed_dim, true,
                            1.0 / std::sqrt(static_cast<double>(d)));

  // Text tower: base weights are always frozen.
  const int w = config_.text_width;
  token_embed_ = params_.add("text.token_embed", normal(ByteTokenizer::kVocabSize, w, 1.0), false);
  text_pos_ = params_.add("text.pos_embed", normal(config_.text_context, w, 0.1), false);
  for (int l = 0; l < config_.text_layers; ++l) {
    text_blocks_.push_back(make_block("text.blocks." + std::to_string(l), w, false, true));
  }
  text_ln_gamma_ = params_.add("text.ln_final.gamma", Matrix::Ones(1, w), false);
  text_ln_beta_ = params_.add("text.ln_final.beta", Matrix::Zero(1, w), false);
  text_proj_ = params_.add("text.proj", normal(w, config_.embed_dim, 1.0 / std::sqrt(static_cast<double>(w))),
                           false);
  logit_scale_ = params_.add("logit_scale", Matrix::Constant(1, 1, config_.logit_scale_init), true);
  clamp_logit_scale();
}

Var SiaModel::apply_linear(const Linear& l, const Var& x) const {
  return ad::add_row(ad::matmul(x, l.weight), l.bias);
}

Var SiaModel::adapted(const Linear& l, int adapter, const Var& x, bool use_adapters) const {
  Var y = apply_linear(l, x);
  if (!use_adapters || adapter < 0) return y;
  const LowRankAdapter& a = adapters_[static_cast<std::size_t>(adapter)];
  // x A^T B^T, scaled.
  Var low = ad::matmul_nt(ad::matmul_nt(x, a.down), a.up);
  return ad::add(y, ad::scale(low, a.scale));
}

Var SiaModel::apply_block(const Block& b, const Var& x, int heads, bool causal,
                          bool use_adapters) const {
  const Eigen::Index width = x.cols();
  const Eigen::Index head_dim = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var h = ad::layer_norm_rows(x, b.ln1_gamma, b.ln1_beta);
  Var qkv = apply_linear(b.qkv, h);
  std::vector<Var> head_out;
  head_out.reserve(static_cast<std::size_t>(heads));
  for (int k = 0; k < heads; ++k) {
    Var q = ad::slice_cols(qkv, k * head_dim, head_dim);
    Var kk = ad::slice_cols(qkv, width + k * head_dim, head_dim);
    Var v = ad::slice_cols(qkv, 2 * width + k * head_dim, head_dim);
    Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(q, kk), inv_sqrt), causal);
    head_out.push_back(ad::matmul(attn, v));
  }
  Var attended = heads == 1 ? head_out.front() : ad::concat_cols(head_out);
  Var x1 = ad::add(x, apply_linear(b.out, attended));

  Var h2 = ad::layer_norm_rows(x1, b.ln2_gamma, b.ln2_beta);
  Var mid = ad::gelu(adapted(b.fc1, b.fc1_adapter, h2, use_adapters));
  return ad::add(x1, adapted(b.fc2, b.fc2_adapter, mid, use_adapters));
}

VideoOutputs SiaModel::forward_video(const Clip& clip) const {
  const int t_frames = config_.frames;
  const int p = config_.patch_size;
  const int g = config_.grid_size();
  const int s_count = config_.patches_per_frame();
  if (clip.frames != t_frames || clip.height != config_.image_size || clip.width != config_.image_size) {
    throw ConfigError("clip shape " + std::to_string(clip.frames) + "x" + std::to_string(clip.height) +
                      "x" + std::to_string(clip.width) + " does not match model config " +
                      std::to_string(t_frames) + "x" + std::to_string(config_.image_size) + "x" +
                      std::to_string(config_.image_size));
  }
  const int n_patch = t_frames * s_count;
  Matrix patches(n_patch, p * p * 3);
  for (int t = 0; t < t_frames; ++t) {
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) {
        const int row = t * s_count + gy * g + gx;
        int col = 0;
        for (int y = 0; y < p; ++y) {
          for (int x = 0; x < p; ++x) {
            for (int c = 0; c < 3; ++c) {
              patches(row, col++) = 2.0 * static_cast<double>(clip.at(t, gy * p + y, gx * p + x, c)) - 1.0;
            }
          }
        }
      }
    }
  }
  std::vector<Eigen::Index> spatial_idx(static_cast<std::size_t>(n_patch));
  std::vector<Eigen::Index> temporal_idx(static_cast<std::size_t>(n_patch));
  for (int i = 0; i < n_patch; ++i) {
    spatial_idx[static_cast<std::size_t>(i)] = i % s_count;
    temporal_idx[static_cast<std::size_t>(i)] = i / s_count;
  }
  Var tokens = apply_linear(patch_embed_, ad::constant(std::move(patches)));
  tokens = ad::add(tokens, ad::add(ad::gather_rows(pos_spatial_, spatial_idx),
                                   ad::gather_rows(pos_temporal_, temporal_idx)));
  if (config_.mode == RegressionMode::kDet) {
    Var det = det_pos_.defined() ? ad::add(det_tokens_, det_pos_) : det_tokens_;
    tokens = ad::concat_rows({tokens, det});
  }
  for (const auto& block : video_blocks_) {
    tokens = apply_block(block, tokens, config_.video_heads, false, false);
  }
  tokens = ad::layer_norm_rows(tokens, video_ln_gamma_, video_ln_beta_);

  Var queries;
  if (config_.mode == RegressionMode::kDet) {
    queries = ad::slice_rows(tokens, n_patch, config_.n_det_tokens);
  } else {
    Matrix pool = Matrix::Zero(s_count, n_patch);
    for (int i = 0; i < n_patch; ++i) pool(i % s_count, i) = 1.0 / t_frames;
    queries = ad::matmul(ad::constant(std::move(pool)), tokens);
  }

  VideoOutputs out;
  Var hb = ad::gelu(apply_linear(box_fc0_, queries));
  hb = ad::gelu(apply_linear(box_fc1_, hb));
  out.boxes = ad::sigmoid(apply_linear(box_fc2_, hb));
  out.actor_logits = apply_linear(actor_head_, queries);
  out.embeddings = ad::l2_normalize_rows(apply_linear(embed_head_, queries));
  return out;
}

Var SiaModel::forward_text(const std::string& text, bool use_adapters) const {
  const auto tok = ByteTokenizer::encode(text, config_.text_context);
  if (tok.truncated) {
    log_warning("text truncated to " + std::to_string(config_.text_context) + " tokens: '" + text + "'");
  }
  std::vector<Eigen::Index> ids(tok.ids.begin(), tok.ids.end());
  std::vector<Eigen::Index> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<Eigen::Index>(i);
  Var x = ad::add(ad::gather_rows(token_embed_, ids), ad::gather_rows(text_pos_, positions));
  for (const auto& block : text_blocks_) {
    x = apply_block(block, x, config_.text_heads, true, use_adapters);
  }
  x = ad::layer_norm_rows(x, text_ln_gamma_, text_ln_beta_);
  Var pooled;
  if (config_.text_pooling == TextPooling::kMean) {
    pooled = ad::matmul(ad::constant(Matrix::Constant(1, x.rows(), 1.0 / static_cast<double>(x.rows()))), x);
  } else {
    pooled = ad::slice_rows(x, x.rows() - 1, 1);
  }
  return ad::l2_normalize_rows(ad::matmul(pooled, text_proj_));
}

std::vector<DetectionTriplet> SiaModel::encode_video(const Clip& clip) const {
  ad::NoGradGuard guard;
  return forward_video(clip).triplets();
}

Eigen::VectorXd SiaModel::encode_text(const std::string& text) const {
  ad::NoGradGuard guard;
  return forward_text(text, true).value().row(0).transpose();
}

Eigen::VectorXd SiaModel::encode_text_base(const std::string& text) const {
  ad::NoGradGuard guard;
  return forward_text(text, false).value().row(0).transpose();
}

void SiaModel::clamp_logit_scale() {
  auto& v = logit_scale_.mutable_value();
  v(0, 0) = std::clamp(v(0, 0), config_.logit_scale_min, config_.logit_scale_max);
}

std::uint64_t SiaModel::text_weights_version() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_.entries()) {
    if (p.path.rfind("text.", 0) != 0) continue;
    h = fnv1a(p.path.data(), p.path.size(), h);
    const Matrix& m = p.var.value();
    h = fnv1a(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
  }
  return h;
}

std::vector<DetectionTriplet> encode_video(const Clip& clip, const SiaModel& model) {
  return model.encode_video(clip);
}

Eigen::VectorXd encode_text(const std::string& text, const SiaModel& model) {
  return model.encode_text(text);
}

std::vector<ScoredDetection> score_actions(std::span<const DetectionTriplet> triplets,
                                           const DescriptorBank& bank, double p_act_threshold,
                                           double logit_scale) {
  if (!bank.has_embeddings()) throw LookupError("score_actions: descriptor embeddings are not cached");
  std::vector<ScoredDetection> out;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (!(t.p_act > p_act_threshold)) continue;
    ScoredDetection det;
    det.token = i;
    det.box = t.box;
    det.p_act = t.p_act;
    det.scores.resize(bank.num_classes());
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
      const double sim = averaged_similarity(t.embedding, bank.embeddings(static_cast<ActionId>(c)));
      det.scores[c] = t.p_act * logistic(logit_scale * sim);
    }
    out.push_back(std::move(det));
  }
  return out;
}

GradientCheckResult gradient_check(ad::ParameterSet& params, const std::function<ad::Var()>& loss,
                                   const GradientCheckOptions& options) {
  // (parameter index, flat element index)
  std::vector<std::pair<std::size_t, Eigen::Index>> pool;
  for (std::size_t p = 0; p < params.entries().size(); ++p) {
    const auto& e = params.entries()[p];
    if (!e.trainable) continue;
    for (Eigen::Index k = 0; k < e.var.value().size(); ++k) pool.emplace_back(p, k);
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > options.samples) pool.resize(options.samples);

  params.zero_grad();
  ad::backward(loss());
  std::vector<Matrix> analytic;
  for (auto& e : params.entries()) analytic.push_back(e.var.grad());

  GradientCheckResult result;
  for (const auto& [p, k] : pool) {
    auto& e = params.entries()[p];
    double& w = e.var.mutable_value().data()[k];
    const double original = w;
    double plus = 0.0, minus = 0.0;
    {
      ad::NoGradGuard guard;
      w = original + options.step;
      plus = loss().item();
      w = original - options.step;
      minus = loss().item();
    }
    w = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[p].data()[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error || result.checked == 0) {
      if (rel >= result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = e.path + "[" + std::to_string(k) + "]";
      }
    }
    ++result.checked;
  }
  return result;
}

}  // namespace sia

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, eval, nws, aws, benchmark, synth, split.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sia/checkpoint.hpp"
#include "sia/errors.hpp"
#include "sia/eval.hpp"
#include "sia/harness.hpp"
#include "sia/log.hpp"
#include "sia/manifest_io.hpp"
#include "sia/synthetic.hpp"
#include "sia/weaksup.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    sia::write_text_file(out_path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SiA open-vocabulary action detection toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Print progress information");
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  std::string config_path, resume_path;
  auto* train = app.add_subcommand("train", "Train a detector from a run config");
  train->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume_path, "Training state to continue from")->check(CLI::ExistingFile);

  std::string checkpoint, manifest, bank, out, detections_out, log_path, suite;
  double iou_threshold = sia::kDefaultIouThreshold;
  double p_act_threshold = 0.5;
  int stride = 4;
  auto* eval = app.add_subcommand("eval", "Frame-level mAP of a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest, "Evaluation manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--bank", bank, "Descriptor bank JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Report path (default stdout)");
  eval->add_option("--detections", detections_out, "Also write the detection dump CSV here");
  eval->add_option("--iou", iou_threshold, "IoU threshold")->capture_default_str();
  eval->add_option("--p-act", p_act_threshold, "Actor probability threshold")->capture_default_str();
  eval->add_option("--stride", stride, "Frame sampling stride")->capture_default_str();

  auto* nws = app.add_subcommand("nws", "Append each clip's global action to all of its boxes");
  nws->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  nws->add_option("--out", out, "Refined manifest")->required();
  nws->add_option("--log", log_path, "Resumable record log (JSON lines)");

  std::size_t top_k = 1;
  std::optional<double> min_similarity;
  auto* aws = app.add_subcommand("aws", "Append each clip's global action to the best-matching box");
  aws->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  aws->add_option("--checkpoint", checkpoint, "NWS-trained checkpoint")->required()->check(CLI::ExistingFile);
  aws->add_option("--out", out, "Refined manifest")->required();
  aws->add_option("--bank", bank, "Descriptor bank JSON (default: class names)")->check(CLI::ExistingFile);
  aws->add_option("--top-k", top_k, "Boxes receiving the label per clip")->capture_default_str();
  aws->add_option("--min-similarity", min_similarity, "Similarity gate");
  aws->add_option("--log", log_path, "Resumable record log (JSON lines)");
  aws->add_option("--stride", stride, "Frame sampling stride")->capture_default_str();

  auto* bench = app.add_subcommand("benchmark", "Evaluate a checkpoint on every dataset of a suite");
  bench->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  bench->add_option("--suite", suite, "Suite JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "Report path (default stdout)");

  std::uint64_t seed = 0;
  int clips = 8;
  std::string synth_config;
  std::optional<double> global_fraction;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--seed", seed, "Generator seed")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--clips", clips, "Number of clips")->capture_default_str();
  synth->add_option("--config", synth_config, "Generator config JSON")->check(CLI::ExistingFile);
  synth->add_option("--global-fraction", global_fraction, "Fraction of global-label clips");

  double ratio = 0.75;
  std::string out_dir;
  auto* split = app.add_subcommand("split", "Seeded base/novel class split of a manifest");
  split->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  split->add_option("--ratio", ratio, "Fraction of base classes")->required();
  split->add_option("--seed", seed, "Shuffle seed")->required();
  split->add_option("--out-dir", out_dir, "Output directory (default: next to the manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }
  sia::log_level() = quiet ? sia::LogLevel::kQuiet : verbose ? sia::LogLevel::kInfo : sia::LogLevel::kWarning;

  try {
    if (*train) {
      sia::train(sia::RunConfig::load(config_path), resume_path);
    } else if (*eval) {
      const sia::SiaModel model = sia::load_model(checkpoint);
      const sia::LoadedDataset data = sia::load_dataset(manifest, model.config().frames, stride);
      sia::DescriptorBank b = sia::load_bank_file(bank, data.vocab);
      const auto ev = sia::evaluate_model(model, data, b, p_act_threshold, iou_threshold);
      if (!detections_out.empty()) sia::write_text_file(detections_out, sia::write_detection_csv(ev.detections));
      emit(ev.report.to_json().dump(2) + "\n", out);
    } else if (*nws || *aws) {
      const sia::DatasetManifest m = sia::load_manifest(manifest);
      sia::RefinementOptions opts;
      opts.log_path = log_path;
      if (*nws) {
        opts.mode = sia::WeakSupMode::kNws;
        const auto result = sia::run_refinement(m, nullptr, nullptr, {}, opts);
        sia::save_manifest(out, result.manifest);
      } else {
        opts.mode = sia::WeakSupMode::kAws;
        opts.aws.top_k = top_k;
        opts.aws.min_similarity = min_similarity;
        opts.checkpoint_id = fs::path(checkpoint).filename().string();
        const sia::SiaModel model = sia::load_model(checkpoint);
        const sia::ActionVocabulary vocab = sia::load_manifest_vocabulary(manifest, m);
        sia::DescriptorBank b = sia::load_bank_file(bank, vocab);
        const auto result =
            sia::run_refinement(m, &model, &b, sia::manifest_clip_loader(manifest, model.config().frames, stride), opts);
        sia::save_manifest(out, result.manifest);
      }
    } else if (*bench) {
      const sia::SiaModel model = sia::load_model(checkpoint);
      emit(sia::benchmark(model, suite).dump(2) + "\n", out);
    } else if (*synth) {
      sia::SynthConfig cfg;
      if (!synth_config.empty()) cfg = sia::SynthConfig::from_json(sia::read_json_file(synth_config));
      if (global_fraction) cfg.global_fraction = *global_fraction;
      sia::write_synthetic_dataset(out, sia::generate_synthetic(seed, clips, cfg), cfg);
    } else if (*split) {
      const sia::DatasetManifest m = sia::load_manifest(manifest);
      const sia::ActionVocabulary vocab = sia::load_manifest_vocabulary(manifest, m);
      const auto result = sia::split_base_novel(m, vocab, ratio, seed);
      const fs::path src(manifest);
      const fs::path dir = out_dir.empty() ? src.parent_path() : fs::path(out_dir);
      const std::string stem = src.stem().string();
      sia::save_manifest((dir / (stem + ".base.json")).string(), result.base);
      sia::save_manifest((dir / (stem + ".novel.json")).string(), result.novel);
      ordered_json summary;
      summary["seed"] = seed;
      summary["ratio"] = ratio;
      auto names = [&vocab](const std::vector<sia::ActionId>& ids) {
        auto arr = ordered_json::array();
        for (auto id : ids) arr.push_back(vocab.name_of(id));
        return arr;
      };
      summary["base_classes"] = names(result.base_classes);
      summary["novel_classes"] = names(result.novel_classes);
      summary["base_entries"] = result.base.entries.size();
      summary["novel_entries"] = result.novel.entries.size();
      sia::write_text_file((dir / (stem + ".split.json")).string(), summary.dump(1) + "\n");
      std::cout << summary.dump(1) << "\n";
    }
  } catch (const sia::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const sia::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const sia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const sia::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid JSON: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}

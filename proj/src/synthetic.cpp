// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "sia/errors.hpp"

namespace sia {
namespace {

std::pair<int, int> direction_step(Direction d) {
  switch (d) {
    case Direction::kLeft:
      return {-1, 0};
    case Direction::kRight:
      return {1, 0};
    case Direction::kUp:
      return {0, -1};
    case Direction::kDown:
      return {0, 1};
  }
  return {0, 0};
}

Direction parse_direction(const std::string& s) {
  if (s == "left") return Direction::kLeft;
  if (s == "right") return Direction::kRight;
  if (s == "up") return Direction::kUp;
  if (s == "down") return Direction::kDown;
  throw ConfigError("unknown direction '" + s + "'");
}

int direction_index(const SynthConfig& c, Direction d) {
  const auto it = std::find(c.directions.begin(), c.directions.end(), d);
  if (it == c.directions.end()) throw ConfigError("direction not configured");
  return static_cast<int>(it - c.directions.begin());
}

// Pixel extents of an actor over every frame of the clip.
bool overlaps_any(const SyntheticActor& a, const std::vector<SyntheticActor>& others,
                  const SynthConfig& c, int keyframe) {
  const auto [adx, ady] = direction_step(a.direction);
  for (const auto& o : others) {
    const auto [odx, ody] = direction_step(o.direction);
    for (int t = 0; t < c.frames; ++t) {
      const int off = (t - keyframe) * c.speed;
      const int ax = a.x + adx * off, ay = a.y + ady * off;
      const int ox = o.x + odx * off, oy = o.y + ody * off;
      // One pixel of separation keeps rectangles visually distinct.
      if (ax < ox + o.w + 1 && ox < ax + a.w + 1 && ay < oy + o.h + 1 && oy < ay + a.h + 1) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::kLeft:
      return "left";
    case Direction::kRight:
      return "right";
    case Direction::kUp:
      return "up";
    case Direction::kDown:
      return "down";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (frames < 1 || height < 4 || width < 4) throw ConfigError("synthetic clip shape too small");
  if (min_actors < 1 || max_actors < min_actors) throw ConfigError("invalid actor count range");
  if (colors.empty() || directions.empty()) throw ConfigError("colors and directions must be non-empty");
  if (static_cast<int>(colors.size()) < max_actors) {
    throw ConfigError("each actor in a clip needs a distinct color; add colors or lower max_actors");
  }
  if (min_size < 1 || max_size < min_size) throw ConfigError("invalid rectangle size range");
  const int travel = (frames - 1) * speed;
  if (max_size + travel >= std::min(width, height)) throw ConfigError("rectangles cannot fit their motion");
  if (global_fraction < 0.0 || global_fraction > 1.0) throw ConfigError("global_fraction outside [0,1]");
  if (speed < 0) throw ConfigError("speed must be non-negative");
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["frames"] = frames;
  j["height"] = height;
  j["width"] = width;
  j["min_actors"] = min_actors;
  j["max_actors"] = max_actors;
  auto& cols = j["colors"] = nlohmann::ordered_json::array();
  for (const auto& c : colors) cols.push_back({{"name", c.name}, {"rgb", {c.r, c.g, c.b}}});
  auto& dirs = j["directions"] = nlohmann::ordered_json::array();
  for (auto d : directions) dirs.push_back(direction_name(d));
  j["coarse_labels"] = coarse_labels;
  j["global_fraction"] = global_fraction;
  j["min_size"] = min_size;
  j["max_size"] = max_size;
  j["speed"] = speed;
  j["noise"] = noise;
  j["clip_prefix"] = clip_prefix;
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& doc) {
  SynthConfig c;
  auto get = [&doc](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("frames", c.frames);
  get("height", c.height);
  get("width", c.width);
  get("min_actors", c.min_actors);
  get("max_actors", c.max_actors);
  if (doc.contains("colors")) {
    c.colors.clear();
    for (const auto& col : doc.at("colors")) {
      const auto& rgb = col.at("rgb");
      c.colors.push_back({col.at("name").get<std::string>(), rgb.at(0).get<float>(),
                          rgb.at(1).get<float>(), rgb.at(2).get<float>()});
    }
  }
  if (doc.contains("directions")) {
    c.directions.clear();
    for (const auto& d : doc.at("directions")) c.directions.push_back(parse_direction(d.get<std::string>()));
  }
  get("coarse_labels", c.coarse_labels);
  get("global_fraction", c.global_fraction);
  get("min_size", c.min_size);
  get("max_size", c.max_size);
  get("speed", c.speed);
  get("noise", c.noise);
  get("clip_prefix", c.clip_prefix);
  c.validate();
  return c;
}

ActionId fine_class(const SynthConfig& config, int color, Direction d) {
  return color * static_cast<int>(config.directions.size()) + direction_index(config, d);
}

ActionId coarse_class(const SynthConfig& config, Direction d) {
  if (!config.coarse_labels) throw ConfigError("coarse labels are disabled");
  return static_cast<int>(config.colors.size() * config.directions.size()) + direction_index(config, d);
}

ActionVocabulary synthetic_vocabulary(const SynthConfig& config) {
  std::vector<std::string> names;
  for (const auto& c : config.colors) {
    for (auto d : config.directions) names.push_back(c.name + "_" + direction_name(d));
  }
  if (config.coarse_labels) {
    for (auto d : config.directions) names.push_back("move_" + direction_name(d));
  }
  return ActionVocabulary::from_names(names);
}

SyntheticDataset generate_synthetic(std::uint64_t seed, int n_clips, const SynthConfig& config) {
  config.validate();
  if (n_clips < 1) throw ArgumentError("n_clips must be at least 1");
  SyntheticDataset ds;
  ds.vocab = synthetic_vocabulary(config);
  ds.manifest.vocabulary_ref = "vocab.json";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, config.noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int key = middle_frame(config.frames);
  const int n_colors = static_cast<int>(config.colors.size());
  const int n_dirs = static_cast<int>(config.directions.size());

  for (int n = 0; n < n_clips; ++n) {
    const int want = std::uniform_int_distribution<int>(config.min_actors, config.max_actors)(rng);
    std::vector<int> palette(static_cast<std::size_t>(n_colors));
    for (int i = 0; i < n_colors; ++i) palette[static_cast<std::size_t>(i)] = i;
    std::shuffle(palette.begin(), palette.end(), rng);

    std::vector<SyntheticActor> actors;
    for (int attempt = 0; attempt < 400 && static_cast<int>(actors.size()) < want; ++attempt) {
      SyntheticActor a;
      a.color = palette[actors.size()];
      a.direction = config.directions[static_cast<std::size_t>(
          std::uniform_int_distribution<int>(0, n_dirs - 1)(rng))];
      a.w = std::uniform_int_distribution<int>(config.min_size, config.max_size)(rng);
      a.h = std::uniform_int_distribution<int>(config.min_size, config.max_size)(rng);
      const auto [dx, dy] = direction_step(a.direction);
      // Keep the rectangle inside the frame over the whole clip.
      const int before = key * config.speed;
      const int after = (config.frames - 1 - key) * config.speed;
      const int lo_x = dx < 0 ? after : (dx > 0 ? before : 0);
      const int hi_x = config.width - a.w - (dx > 0 ? after : (dx < 0 ? before : 0));
      const int lo_y = dy < 0 ? after : (dy > 0 ? before : 0);
      const int hi_y = config.height - a.h - (dy > 0 ? after : (dy < 0 ? before : 0));
      if (hi_x < lo_x || hi_y < lo_y) continue;
      a.x = std::uniform_int_distribution<int>(lo_x, hi_x)(rng);
      a.y = std::uniform_int_distribution<int>(lo_y, hi_y)(rng);
      if (overlaps_any(a, actors, config, key)) continue;
      actors.push_back(a);
    }
    if (static_cast<int>(actors.size()) < config.min_actors) {
      throw ConfigError("could not place the minimum number of actors; enlarge the frame");
    }

    Clip clip(config.frames, config.height, config.width);
    for (float& v : clip.pixels) v = noise(rng);
    for (const auto& a : actors) {
      const auto [dx, dy] = direction_step(a.direction);
      const auto& col = config.colors[static_cast<std::size_t>(a.color)];
      for (int t = 0; t < config.frames; ++t) {
        const int off = (t - key) * config.speed;
        const int x0 = a.x + dx * off, y0 = a.y + dy * off;
        for (int y = y0; y < y0 + a.h; ++y) {
          for (int x = x0; x < x0 + a.w; ++x) {
            clip.at(t, y, x, 0) = col.r;
            clip.at(t, y, x, 1) = col.g;
            clip.at(t, y, x, 2) = col.b;
          }
        }
      }
    }

    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", config.clip_prefix.c_str(), n);
    ManifestEntry entry;
    entry.clip_id = id;
    entry.frames = std::string("clips/") + id + ".f32";
    entry.source_keyframe = key;
    entry.annotation.clip_id = id;
    const bool global = unit(rng) < config.global_fraction;
    int performer = -1;
    if (global) {
      performer = std::uniform_int_distribution<int>(0, static_cast<int>(actors.size()) - 1)(rng);
      const auto& p = actors[static_cast<std::size_t>(performer)];
      entry.annotation.global_action = fine_class(config, p.color, p.direction);
    }
    for (const auto& a : actors) {
      entry.annotation.boxes.push_back(
          {static_cast<double>(a.x) / config.width, static_cast<double>(a.y) / config.height,
           static_cast<double>(a.x + a.w) / config.width, static_cast<double>(a.y + a.h) / config.height});
      ActionSet labels;
      if (!global) labels.insert(fine_class(config, a.color, a.direction));
      if (config.coarse_labels) labels.insert(coarse_class(config, a.direction));
      entry.annotation.action_sets.push_back(std::move(labels));
    }
    ds.manifest.entries.push_back(std::move(entry));
    ds.clips.push_back(std::move(clip));
    ds.actors.push_back(std::move(actors));
    ds.performer.push_back(performer);
  }
  return ds;
}

DescriptorBank synthetic_descriptor_bank(const SynthConfig& config, std::size_t per_class) {
  static const char* kFine[] = {"{c} {d}",        "{c} moving {d}",  "{c} going {d}",  "{c}, {d}",
                                "{c} block {d}",  "{c} heading {d}", "{c} to the {d}", "{c} drifting {d}",
                                "{c} sliding {d}", "{c} box {d}",     "{c} travels {d}", "{c} shape {d}",
                                "{c} tile {d}",   "{c} moves {d}",   "{c} square {d}", "{c} glides {d}"};
  static const char* kCoarse[] = {"moving {d}",   "going {d}",      "{d}",         "heading {d}",
                                  "to the {d}",   "drifting {d}",   "sliding {d}", "motion {d}",
                                  "travels {d}",  "{d} motion",     "shifting {d}", "{d} movement",
                                  "glides {d}",   "moves {d}",      "{d} ward",    "steps {d}"};
  auto fill = [](const char* tmpl, const std::string& c, const std::string& d) {
    std::string s = tmpl;
    for (auto pos = s.find("{c}"); pos != std::string::npos; pos = s.find("{c}")) s.replace(pos, 3, c);
    for (auto pos = s.find("{d}"); pos != std::string::npos; pos = s.find("{d}")) s.replace(pos, 3, d);
    return s;
  };
  per_class = std::clamp<std::size_t>(per_class, 1, 16);
  std::vector<std::vector<std::string>> descriptors;
  for (const auto& c : config.colors) {
    for (auto d : config.directions) {
      std::vector<std::string> list;
      for (std::size_t k = 0; k < per_class; ++k) list.push_back(fill(kFine[k], c.name, direction_name(d)));
      descriptors.push_back(std::move(list));
    }
  }
  if (config.coarse_labels) {
    for (auto d : config.directions) {
      std::vector<std::string> list;
      for (std::size_t k = 0; k < per_class; ++k) list.push_back(fill(kCoarse[k], "", direction_name(d)));
      descriptors.push_back(std::move(list));
    }
  }
  return DescriptorBank(std::move(descriptors));
}

}  // namespace sia

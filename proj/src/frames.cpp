// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sia/data.hpp"
#include "sia/errors.hpp"

namespace sia {
namespace {

constexpr char kMagic[4] = {'S', 'I', 'A', 'F'};

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return to_little(v);
}

}  // namespace

void write_raw_frames(const std::string& path, const Clip& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(frames.frames));
  write_u32(out, static_cast<std::uint32_t>(frames.height));
  write_u32(out, static_cast<std::uint32_t>(frames.width));
  for (float v : frames.pixels) {
    const float le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(le));
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

Clip read_raw_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open frame source '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a raw frame file");
  }
  const auto t = read_u32(in);
  const auto h = read_u32(in);
  const auto w = read_u32(in);
  if (!in || t == 0 || h == 0 || w == 0 || t > 100000 || h > 16384 || w > 16384) {
    throw IoError("'" + path + "' has an invalid header");
  }
  Clip clip(static_cast<int>(t), static_cast<int>(h), static_cast<int>(w));
  in.read(reinterpret_cast<char*>(clip.pixels.data()),
          static_cast<std::streamsize>(clip.pixels.size() * sizeof(float)));
  if (!in) throw IoError("'" + path + "' is truncated");
  for (float& v : clip.pixels) v = to_little(v);
  return clip;
}

std::unique_ptr<FrameSource> open_raw_frames(const std::string& path) {
  return std::make_unique<InMemoryFrameSource>(read_raw_frames(path));
}

}  // namespace sia

// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

namespace sia {

/// Byte-level tokenizer: ids 0..255 are raw bytes, then begin/end markers.
class ByteTokenizer {
 public:
  static constexpr int kBegin = 256;
  static constexpr int kEnd = 257;
  static constexpr int kVocabSize = 258;

  struct Result {
    std::vector<int> ids;
    bool truncated = false;
  };

  /// [begin, bytes..., end], keeping at most `context` ids in total.
  static Result encode(std::string_view text, int context);
};

}  // namespace sia

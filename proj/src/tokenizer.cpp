// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/tokenizer.hpp"

#include "sia/errors.hpp"

namespace sia {

ByteTokenizer::Result ByteTokenizer::encode(std::string_view text, int context) {
  if (context < 2) throw ConfigError("text context must hold at least the two markers");
  Result r;
  const std::size_t room = static_cast<std::size_t>(context) - 2;
  r.truncated = text.size() > room;
  const std::size_t n = r.truncated ? room : text.size();
  r.ids.reserve(n + 2);
  r.ids.push_back(kBegin);
  for (std::size_t i = 0; i < n; ++i) r.ids.push_back(static_cast<unsigned char>(text[i]));
  r.ids.push_back(kEnd);
  return r;
}

}  // namespace sia

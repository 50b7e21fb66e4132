// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/errors.hpp"

namespace sia {

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

}  // namespace sia

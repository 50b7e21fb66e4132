// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <string>

namespace sia {

enum class LogLevel { kQuiet = 0, kWarning = 1, kInfo = 2 };

inline LogLevel& log_level() {
  static LogLevel level = LogLevel::kWarning;
  return level;
}

inline void log_warning(const std::string& msg) {
  if (log_level() >= LogLevel::kWarning) std::cerr << "warning: " << msg << '\n';
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << msg << '\n';
}

}  // namespace sia

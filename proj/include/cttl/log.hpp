// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

namespace cttl::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, const std::string&)>;

// Replaces the process-wide sink; returns the previous one. The default sink
// writes warnings and errors to stderr.
Sink set_sink(Sink sink);
void set_min_level(Level level);

void write(Level level, const std::string& msg);
inline void debug(const std::string& msg) { write(Level::debug, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }

}  // namespace cttl::log

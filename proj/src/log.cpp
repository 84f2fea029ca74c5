// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/log.hpp"

#include <iostream>
#include <mutex>

namespace cttl::log {

namespace {

std::mutex g_mutex;
Level g_min = Level::warn;

const char* level_tag(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}

Sink& sink_ref() {
    static Sink sink = [](Level l, const std::string& msg) { std::cerr << "[" << level_tag(l) << "] " << msg << "\n"; };
    return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    Sink prev = std::move(sink_ref());
    sink_ref() = std::move(sink);
    return prev;
}

void set_min_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_min = level;
}

void write(Level level, const std::string& msg) {
    std::lock_guard lock(g_mutex);
    if (level < g_min || !sink_ref()) return;
    sink_ref()(level, msg);
}

}  // namespace cttl::log

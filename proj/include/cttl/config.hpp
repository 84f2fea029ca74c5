// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cttl/harness.hpp"

namespace cttl::config {

struct MomentumPoint {
    double gamma = 0.8;
    double lambda = 0.9;
    double delta = 0.9999;

    bool single_momentum() const { return gamma == lambda && lambda == delta; }
};

struct RunConfig {
    harness::ExperimentConfig experiment;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string out_dir = "runs";
    std::vector<harness::Variant> ablate_variants;
    std::vector<MomentumPoint> momentum_grid;

    // Copies shared dimensions (input_dim, embed_dim) between sections and
    // validates the experiment.
    void resolve();
};

// Every "section.key" the parser accepts, in canonical order.
std::vector<std::string> known_keys();

// Parses INI-style text: [section] headers, key = value lines, '#' or ';'
// comments (full line, or trailing after whitespace). Unknown sections or keys, duplicates and bad values throw
// std::invalid_argument naming the source line and key.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

void set_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& cfg, std::string_view key);
// "section.key=value"
void apply_override(RunConfig& cfg, std::string_view assignment);

// Round-trips through parse_config.
std::string to_ini(const RunConfig& cfg);

// Sections of the experiment proper; seeds, output directory and ablation
// lists are left out.
nlohmann::ordered_json experiment_json(const RunConfig& cfg);
void apply_experiment_json(RunConfig& cfg, const nlohmann::ordered_json& j);
// 16 hex digits, FNV-1a over the compact experiment JSON.
std::string config_hash(const RunConfig& cfg);

inline constexpr int kManifestVersion = 1;

struct Manifest {
    int version = kManifestVersion;
    RunConfig config;
    std::uint64_t seed = 0;
    std::string hash;
};

Manifest make_manifest(const RunConfig& cfg, std::uint64_t seed);
nlohmann::ordered_json manifest_json(const Manifest& m);
// Throws on a version mismatch or a hash that does not match the config.
Manifest parse_manifest(const nlohmann::ordered_json& j);
Manifest load_manifest(const std::filesystem::path& path);

std::vector<std::uint64_t> parse_seeds(std::string_view text);
std::vector<MomentumPoint> parse_momentum_grid(std::string_view text);

}  // namespace cttl::config

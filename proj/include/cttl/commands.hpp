// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cttl/config.hpp"
#include "cttl/report.hpp"

namespace cttl::cli {

// Where a run of `cfg` with `seed` lands under `out`.
std::filesystem::path run_dir(const std::filesystem::path& out, const config::RunConfig& cfg, std::uint64_t seed);

// Executes the manifest's run and writes its artifacts into `dir`.
report::RunRecord run_manifest(const config::Manifest& manifest, const std::filesystem::path& dir);

// Every seed of `cfg` under cfg.out_dir, plus an aggregated summary.csv.
std::vector<report::RunRecord> cmd_run(const config::RunConfig& cfg, std::ostream& log);

struct AblationResult {
    std::vector<report::Group> variants;  // in configured order
    std::vector<config::MomentumPoint> grid;
    std::vector<report::Group> momentum;  // aligned with grid
    std::vector<report::Verdict> verdicts;
};

// The configured variants (all of them when none are listed) and momentum
// grid (the default grid when none is given), over shared seeds. Writes
// ablation.csv, momentum.csv and verdicts.txt under cfg.out_dir.
AblationResult cmd_ablate(const config::RunConfig& cfg, std::ostream& log);

std::vector<config::MomentumPoint> default_momentum_grid();
std::string ablation_csv(const std::vector<report::Group>& variants);
std::string momentum_csv(const std::vector<config::MomentumPoint>& grid, const std::vector<report::Group>& groups);

// Aggregates every run directory found under `inputs` into `out`.
std::vector<report::Group> cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out,
                                      std::ostream& log);

}  // namespace cttl::cli

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cttl/commands.hpp"
#include "cttl/config.hpp"
#include "cttl/log.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string seeds;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string variant;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "INI config file");
    cmd->add_option("--seeds", f.seeds, "comma separated seeds");
    cmd->add_option("--seed", f.seed, "single seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--variant", f.variant, "method variant");
    cmd->add_option("--override", f.overrides, "section.key=value, repeatable");
}

cttl::config::RunConfig build_config(const CommonFlags& f) {
    auto cfg = f.config_path.empty() ? cttl::config::RunConfig{} : cttl::config::load_config(f.config_path);
    for (const auto& o : f.overrides) cttl::config::apply_override(cfg, o);
    if (!f.variant.empty()) cttl::config::set_value(cfg, "run.variant", f.variant);
    if (!f.seeds.empty()) cfg.seeds = cttl::config::parse_seeds(f.seeds);
    if (f.seed) cfg.seeds = {*f.seed};
    if (!f.out.empty()) cfg.out_dir = f.out;
    cfg.resolve();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cttl: continual test-time learning experiments"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "log info messages");

    CommonFlags run_flags, ablate_flags;
    std::string manifest_path;
    auto* run = app.add_subcommand("run", "run every seed of a config, or one manifest");
    add_common(run, run_flags);
    run->add_option("--manifest", manifest_path, "rerun exactly the run described by a manifest.json");

    auto* ablate = app.add_subcommand("ablate", "variant table and momentum grid over shared seeds");
    add_common(ablate, ablate_flags);

    std::vector<std::string> report_inputs;
    std::string report_out = "report";
    auto* rep = app.add_subcommand("report", "aggregate finished runs");
    rep->add_option("dirs", report_inputs, "run directories or trees containing them")->required();
    rep->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);
    if (verbose) cttl::log::set_min_level(cttl::log::Level::info);

    try {
        if (*run) {
            if (!manifest_path.empty()) {
                const auto m = cttl::config::load_manifest(manifest_path);
                const std::string out = run_flags.out.empty() ? std::string("rerun") : run_flags.out;
                const auto rec = cttl::cli::run_manifest(m, out);
                std::cout << "run " << rec.label << " seed " << m.seed << " -> " << out << "\n";
            } else {
                cttl::cli::cmd_run(build_config(run_flags), std::cout);
            }
        } else if (*ablate) {
            const auto res = cttl::cli::cmd_ablate(build_config(ablate_flags), std::cout);
            for (const auto& v : res.verdicts)
                if (!v.pass) return 3;
        } else if (*rep) {
            std::vector<std::filesystem::path> dirs(report_inputs.begin(), report_inputs.end());
            cttl::cli::cmd_report(dirs, report_out, std::cout);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

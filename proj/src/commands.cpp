// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/commands.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>

namespace cttl::cli {

namespace {

std::string dir_label(const config::RunConfig& cfg) {
    std::string label = report::run_label(cfg);
    std::replace(label.begin(), label.end(), '@', '_');
    std::replace(label.begin(), label.end(), ':', '_');
    return label;
}

std::string stat_cells(const std::vector<double>& v) {
    const report::Stat s = report::summarize(v);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,", 100.0 * s.mean);
    std::string out = buf;
    if (s.std) {
        std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *s.std);
        out += buf;
    }
    return out;
}

// Runs each (config, seed) once per ablation even when several table rows
// share it.
class RunCache {
public:
    explicit RunCache(std::filesystem::path out, std::ostream& log) : out_(std::move(out)), log_(log) {}

    report::Group group(const config::RunConfig& cfg) {
        report::Group g;
        g.label = report::run_label(cfg);
        g.hash = config::config_hash(cfg);
        for (auto seed : cfg.seeds) {
            const auto key = std::make_pair(g.hash, seed);
            auto it = cache_.find(key);
            if (it == cache_.end()) {
                const auto m = config::make_manifest(cfg, seed);
                const auto dir = run_dir(out_, cfg, seed);
                if (auto done = finished_run(dir, m)) {
                    log_ << "reuse " << g.label << " seed " << seed << " <- " << dir.string() << "\n";
                    it = cache_.emplace(key, std::move(*done)).first;
                } else {
                    log_ << "run " << g.label << " seed " << seed << " -> " << dir.string() << "\n";
                    it = cache_.emplace(key, run_manifest(m, dir)).first;
                }
            }
            g.runs.push_back(it->second);
        }
        return g;
    }

private:
    // A run directory left by an earlier invocation with the same manifest.
    static std::optional<report::RunRecord> finished_run(const std::filesystem::path& dir, const config::Manifest& m) {
        if (!std::filesystem::exists(dir / "manifest.json") || !std::filesystem::exists(dir / "metrics.jsonl")) {
            return std::nullopt;
        }
        try {
            const auto prev = config::load_manifest(dir / "manifest.json");
            if (prev.hash != m.hash || prev.seed != m.seed) return std::nullopt;
            return report::load_run(dir);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    std::filesystem::path out_;
    std::ostream& log_;
    std::map<std::pair<std::string, std::uint64_t>, report::RunRecord> cache_;
};

}  // namespace

std::filesystem::path run_dir(const std::filesystem::path& out, const config::RunConfig& cfg, std::uint64_t seed) {
    return out / dir_label(cfg) / ("seed_" + std::to_string(seed));
}

report::RunRecord run_manifest(const config::Manifest& manifest, const std::filesystem::path& dir) {
    config::RunConfig cfg = manifest.config;
    cfg.resolve();
    const harness::RunResult result = harness::run_experiment(cfg.experiment, manifest.seed);
    report::write_run(dir, manifest, result);
    return report::make_record(manifest, result);
}

std::vector<report::RunRecord> cmd_run(const config::RunConfig& cfg_in, std::ostream& log) {
    config::RunConfig cfg = cfg_in;
    cfg.resolve();
    std::vector<report::RunRecord> records;
    for (auto seed : cfg.seeds) {
        const auto dir = run_dir(cfg.out_dir, cfg, seed);
        log << "run " << report::run_label(cfg) << " seed " << seed << " -> " << dir.string() << "\n";
        records.push_back(run_manifest(config::make_manifest(cfg, seed), dir));
        const auto& m = records.back().metrics;
        log << "  Acc. " << report::format_number(m.average_accuracy) << "  F. "
            << (m.forgetting ? report::format_number(*m.forgetting) : std::string("n/a")) << "\n";
    }
    std::filesystem::create_directories(cfg.out_dir);
    report::write_text(std::filesystem::path(cfg.out_dir) / "summary.csv", report::summary_csv(report::group_runs(records)));
    return records;
}

std::vector<config::MomentumPoint> default_momentum_grid() {
    return {{0.9999, 0.9999, 0.9999}, {0.5, 0.9, 0.9999}, {0.7, 0.9, 0.9999},
            {0.8, 0.9, 0.9999},       {0.8, 0.6, 0.9999}, {0.8, 0.5, 0.9999}};
}

std::string ablation_csv(const std::vector<report::Group>& variants) {
    std::string out = "method,seeds,Acc.,Acc. std,F.,F. std\n";
    for (const auto& g : variants) {
        out += g.label + "," + std::to_string(g.runs.size()) + "," + stat_cells(g.accuracies()) + "," +
               stat_cells(g.forgettings()) + "\n";
    }
    return out;
}

std::string momentum_csv(const std::vector<config::MomentumPoint>& grid, const std::vector<report::Group>& groups) {
    if (grid.size() != groups.size()) throw std::invalid_argument("momentum table: grid and results differ in length");
    std::string out = "gamma,lambda,delta,seeds,Acc.,Acc. std,F.,F. std,FTA,FTA std,note\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& p = grid[i];
        const auto& g = groups[i];
        std::vector<double> fta;
        for (const auto& r : g.runs) fta.push_back(r.metrics.first_task_accuracy);
        std::string note;
        if (p.single_momentum()) note = "single-momentum reduction";
        else if (p.lambda < p.gamma) note = "lambda < gamma";
        out += report::format_number(p.gamma) + "," + report::format_number(p.lambda) + "," + report::format_number(p.delta) +
               "," + std::to_string(g.runs.size()) + "," + stat_cells(g.accuracies()) + "," + stat_cells(g.forgettings()) +
               "," + stat_cells(fta) + "," + note + "\n";
    }
    return out;
}

AblationResult cmd_ablate(const config::RunConfig& cfg_in, std::ostream& log) {
    config::RunConfig cfg = cfg_in;
    cfg.resolve();
    AblationResult res;
    RunCache cache(cfg.out_dir, log);
    const auto variants = cfg.ablate_variants.empty() ? harness::all_variants() : cfg.ablate_variants;
    for (auto v : variants) {
        config::RunConfig c = cfg;
        c.experiment.variant = v;
        c.resolve();
        res.variants.push_back(cache.group(c));
    }
    res.grid = cfg.momentum_grid.empty() ? default_momentum_grid() : cfg.momentum_grid;
    for (const auto& p : res.grid) {
        config::RunConfig c = cfg;
        c.experiment.variant = harness::Variant::dosapp;
        c.experiment.ema.gamma = p.gamma;
        c.experiment.ema.lambda = p.lambda;
        c.experiment.ema.delta = p.delta;
        c.resolve();
        res.momentum.push_back(cache.group(c));
    }

    auto variant_group = [&](harness::Variant v) -> const report::Group* {
        for (std::size_t i = 0; i < variants.size(); ++i)
            if (variants[i] == v) return &res.variants[i];
        return nullptr;
    };
    const auto* dosapp = variant_group(harness::Variant::dosapp);
    const auto* finetune = variant_group(harness::Variant::finetune_no_ttl);
    const auto* union_single = variant_group(harness::Variant::plus_union_single_momentum);
    const auto* ts_only = variant_group(harness::Variant::teacher_student_only);
    if (dosapp && finetune) res.verdicts.push_back(report::forgetting_trend(*dosapp, *finetune));
    if (dosapp && union_single && ts_only) res.verdicts.push_back(report::ladder_trend(*dosapp, *union_single, *ts_only));
    const report::Group* single = nullptr;
    const report::Group* dual = nullptr;
    const ema::EmaConfig defaults;
    for (std::size_t i = 0; i < res.grid.size(); ++i) {
        const auto& p = res.grid[i];
        if (p.single_momentum() && p.delta == defaults.delta) single = &res.momentum[i];
        if (p.gamma == defaults.gamma && p.lambda == defaults.lambda && p.delta == defaults.delta) dual = &res.momentum[i];
    }
    if (single && dual) res.verdicts.push_back(report::momentum_trend(*single, *dual));

    const std::filesystem::path out = cfg.out_dir;
    std::filesystem::create_directories(out);
    report::write_text(out / "ablation.csv", ablation_csv(res.variants));
    report::write_text(out / "momentum.csv", momentum_csv(res.grid, res.momentum));
    std::string verdicts;
    for (const auto& v : res.verdicts) verdicts += report::format_verdict(v) + "\n";
    report::write_text(out / "verdicts.txt", verdicts);
    log << "\n" << ablation_csv(res.variants) << "\n" << momentum_csv(res.grid, res.momentum) << "\n" << verdicts;
    return res;
}

std::vector<report::Group> cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out,
                                      std::ostream& log) {
    std::set<std::filesystem::path> dirs;
    for (const auto& in : inputs) {
        if (!std::filesystem::exists(in)) throw std::invalid_argument("report: " + in.string() + " does not exist");
        if (std::filesystem::exists(in / "manifest.json")) dirs.insert(in);
        if (!std::filesystem::is_directory(in)) continue;
        for (const auto& e : std::filesystem::recursive_directory_iterator(in)) {
            if (e.is_regular_file() && e.path().filename() == "manifest.json") dirs.insert(e.path().parent_path());
        }
    }
    if (dirs.empty()) throw std::invalid_argument("report: no run directories found");
    std::vector<report::RunRecord> runs;
    for (const auto& d : dirs) runs.push_back(report::load_run(d));
    auto groups = report::group_runs(std::move(runs));
    report::write_report(out, groups);
    log << report::summary_csv(groups);
    return groups;
}

}  // namespace cttl::cli

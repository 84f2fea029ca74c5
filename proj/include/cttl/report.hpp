// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cttl/config.hpp"
#include "cttl/harness.hpp"
#include "cttl/metrics.hpp"

namespace cttl::report {

// Shortest text that parses back to the same double.
std::string format_number(double v);

// One line per completed row: checkpoint,session,task_0..task_{T-1}; cells
// above the diagonal stay empty.
std::string r_matrix_csv(const metrics::ResultMatrix& r);
std::string metrics_jsonl(const harness::RunResult& result);

// A run as persisted on disk, or as just computed.
struct RunRecord {
    config::Manifest manifest;
    std::string label;
    metrics::ResultMatrix post_supervised{1, metrics::Checkpoint::post_supervised};
    metrics::ResultMatrix post_ttl{1, metrics::Checkpoint::post_ttl};
    metrics::Metrics metrics;
    double zero_shot_accuracy = 0.0;
    std::size_t ttl_rows = 0;
};

// Variant name, with the momenta appended when they differ from the defaults.
std::string run_label(const config::RunConfig& cfg);

RunRecord make_record(const config::Manifest& manifest, const harness::RunResult& result);

// manifest.json, metrics.jsonl, R_postttl.csv, R_postsup.csv, summary.csv and
// final.ckpt under `dir`.
void write_run(const std::filesystem::path& dir, const config::Manifest& manifest, const harness::RunResult& result);

// Rebuilds a record from manifest.json and metrics.jsonl only.
RunRecord load_run(const std::filesystem::path& dir);

struct Stat {
    double mean = 0.0;
    std::optional<double> std;  // sample std; absent for a single value
    std::size_t n = 0;
};
Stat summarize(const std::vector<double>& values);
double median(std::vector<double> values);

struct Group {
    std::string label;
    std::string hash;
    std::vector<RunRecord> runs;  // ascending seed

    std::vector<double> accuracies() const;
    std::vector<double> forgettings() const;
};

// Runs sharing a config hash form a group; groups sort by label, then hash.
std::vector<Group> group_runs(std::vector<RunRecord> runs);
const Group* find_group(const std::vector<Group>& groups, const std::string& label);

// Cross-seed table in the Acc./F. layout (percent).
std::string summary_csv(const std::vector<Group>& groups);
// Mean accuracy over seen tasks after each session, per checkpoint.
std::string curves_csv(const std::vector<Group>& groups);
// Per-task forgetting R_ii - R_Ti for every task before the last.
std::string forgetting_csv(const std::vector<Group>& groups);

// summary.csv, curves.csv and forgetting.csv under `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<Group>& groups);

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Median forgetting lower and median accuracy higher than the baseline.
Verdict forgetting_trend(const Group& method, const Group& baseline);
// Strictly above `single` in at least 4 of 5 seeds (scaled for other seed
// counts) and median at least that of `teacher_student`.
Verdict ladder_trend(const Group& method, const Group& single, const Group& teacher_student);
// Median accuracy of `single` strictly below `dual`.
Verdict momentum_trend(const Group& single, const Group& dual);
std::string format_verdict(const Verdict& v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace cttl::report

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cttl/checkpoint.hpp"

namespace cttl::report {

namespace {

using nlohmann::ordered_json;

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return buf;
}

ordered_json row_json(const std::vector<double>& row) {
    ordered_json a = ordered_json::array();
    for (double v : row) a.push_back(v);
    return a;
}

std::string stat_cells(const Stat& s) {
    return percent(s.mean) + "," + (s.std ? percent(*s.std) : std::string());
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::string r_matrix_csv(const metrics::ResultMatrix& r) {
    std::string out = "checkpoint,session";
    for (std::size_t j = 0; j < r.tasks(); ++j) out += ",task_" + std::to_string(j);
    out += "\n";
    const std::string tag(metrics::checkpoint_name(r.tag()));
    for (std::size_t i = 0; i < r.completed(); ++i) {
        out += tag + "," + std::to_string(i);
        for (std::size_t j = 0; j < r.tasks(); ++j) out += "," + (j <= i ? format_number(r.at(i, j)) : std::string());
        out += "\n";
    }
    return out;
}

std::string metrics_jsonl(const harness::RunResult& result) {
    std::string out;
    auto emit = [&out](const ordered_json& j) { out += j.dump() + "\n"; };
    emit({{"type", "zero_shot"}, {"accuracy", result.zero_shot_accuracy}});
    for (const auto& s : result.sessions) {
        emit({{"type", "session"},
              {"session", s.session},
              {"checkpoint", "post_supervised"},
              {"row", row_json(s.post_supervised_row)},
              {"supervised_steps", s.supervised_steps},
              {"train_loss", s.train_loss},
              {"mask_popcount", s.mask_popcount}});
        if (s.ttl) {
            for (const auto& b : s.ttl->batches) {
                emit({{"type", "ttl"},
                      {"session", s.session},
                      {"batch", b.batch_index},
                      {"batch_size", b.batch_size},
                      {"accepted", b.accepted},
                      {"teacher_fraction", b.teacher_fraction},
                      {"student_fraction", b.student_fraction},
                      {"mean_teacher_max_logit", b.mean_teacher_max_logit},
                      {"mean_student_max_logit", b.mean_student_max_logit},
                      {"pseudo_label_entropy", b.pseudo_label_entropy}});
            }
        }
        emit({{"type", "session"},
              {"session", s.session},
              {"checkpoint", "post_ttl"},
              {"row", row_json(s.post_ttl_row)},
              {"ttl_steps", s.ttl ? s.ttl->steps : 0},
              {"ttl_mask_popcount", s.ttl_mask_popcount}});
    }
    ordered_json m{{"type", "metrics"},
                   {"average_accuracy", result.metrics.average_accuracy},
                   {"forgetting", nullptr},
                   {"first_task_accuracy", result.metrics.first_task_accuracy},
                   {"current_task_accuracy", result.metrics.current_task_accuracy},
                   {"last_task_accuracy", result.metrics.last_task_accuracy}};
    if (result.metrics.forgetting) m["forgetting"] = *result.metrics.forgetting;
    emit(m);
    return out;
}

std::string run_label(const config::RunConfig& cfg) {
    const auto& e = cfg.experiment.ema;
    const ema::EmaConfig defaults;
    std::string label(harness::variant_name(cfg.experiment.variant));
    if (e.gamma != defaults.gamma || e.lambda != defaults.lambda || e.delta != defaults.delta) {
        label += "@" + format_number(e.gamma) + ":" + format_number(e.lambda) + ":" + format_number(e.delta);
    }
    return label;
}

RunRecord make_record(const config::Manifest& manifest, const harness::RunResult& result) {
    RunRecord r;
    r.manifest = manifest;
    r.label = run_label(manifest.config);
    r.post_supervised = result.post_supervised;
    r.post_ttl = result.post_ttl;
    r.metrics = result.metrics;
    r.zero_shot_accuracy = result.zero_shot_accuracy;
    for (const auto& s : result.sessions)
        if (s.ttl) r.ttl_rows += s.ttl->batches.size();
    return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_run(const std::filesystem::path& dir, const config::Manifest& manifest, const harness::RunResult& result) {
    std::filesystem::create_directories(dir);
    write_text(dir / "manifest.json", config::manifest_json(manifest).dump(2) + "\n");
    write_text(dir / "metrics.jsonl", metrics_jsonl(result));
    write_text(dir / "R_postttl.csv", r_matrix_csv(result.post_ttl));
    write_text(dir / "R_postsup.csv", r_matrix_csv(result.post_supervised));
    write_text(dir / "summary.csv", summary_csv(group_runs({make_record(manifest, result)})));
    io::Checkpoint ckpt{result.final_state.student, result.final_state.teacher, result.final_state.history};
    io::save_checkpoint(dir / "final.ckpt", ckpt);
}

RunRecord load_run(const std::filesystem::path& dir) {
    RunRecord r;
    r.manifest = config::load_manifest(dir / "manifest.json");
    r.label = run_label(r.manifest.config);
    const std::size_t tasks = r.manifest.config.experiment.data.session_count();
    r.post_supervised = metrics::ResultMatrix(tasks, metrics::Checkpoint::post_supervised);
    r.post_ttl = metrics::ResultMatrix(tasks, metrics::Checkpoint::post_ttl);
    std::istringstream in(read_text(dir / "metrics.jsonl"));
    std::string line;
    bool have_zero_shot = false;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error((dir / "metrics.jsonl").string() + ":" + std::to_string(n) + ": " + e.what());
        }
        const std::string type = j.at("type").get<std::string>();
        if (type == "zero_shot") {
            r.zero_shot_accuracy = j.at("accuracy").get<double>();
            have_zero_shot = true;
        } else if (type == "ttl") {
            ++r.ttl_rows;
        } else if (type == "session") {
            auto row = j.at("row").get<std::vector<double>>();
            if (j.at("checkpoint").get<std::string>() == "post_supervised") r.post_supervised.push_row(std::move(row));
            else r.post_ttl.push_row(std::move(row));
        }
    }
    if (!have_zero_shot || r.post_ttl.completed() != tasks) {
        throw std::runtime_error("report: " + dir.string() + " holds an incomplete metrics stream");
    }
    r.metrics = metrics::compute_metrics(r.post_ttl);
    return r;
}

Stat summarize(const std::vector<double>& values) {
    Stat s;
    s.n = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> Group::accuracies() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.metrics.average_accuracy);
    return v;
}

std::vector<double> Group::forgettings() const {
    std::vector<double> v;
    for (const auto& r : runs)
        if (r.metrics.forgetting) v.push_back(*r.metrics.forgetting);
    return v;
}

std::vector<Group> group_runs(std::vector<RunRecord> runs) {
    std::map<std::pair<std::string, std::string>, Group> by_key;
    for (auto& r : runs) {
        auto& g = by_key[{r.label, r.manifest.hash}];
        g.label = r.label;
        g.hash = r.manifest.hash;
        for (const auto& other : g.runs) {
            if (other.manifest.seed == r.manifest.seed) {
                throw std::invalid_argument("report: duplicate run for " + r.label + " seed " + std::to_string(r.manifest.seed));
            }
        }
        g.runs.push_back(std::move(r));
    }
    std::vector<Group> out;
    for (auto& [_, g] : by_key) {
        std::sort(g.runs.begin(), g.runs.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.manifest.seed < b.manifest.seed; });
        out.push_back(std::move(g));
    }
    return out;
}

const Group* find_group(const std::vector<Group>& groups, const std::string& label) {
    for (const auto& g : groups)
        if (g.label == label) return &g;
    return nullptr;
}

std::string summary_csv(const std::vector<Group>& groups) {
    std::string out = "method,config_hash,seeds,Acc.,Acc. std,F.,F. std,FTA,FTA std,CTA,CTA std,zero-shot\n";
    for (const auto& g : groups) {
        std::vector<double> fta, cta, zs;
        for (const auto& r : g.runs) {
            fta.push_back(r.metrics.first_task_accuracy);
            cta.push_back(r.metrics.current_task_accuracy);
            zs.push_back(r.zero_shot_accuracy);
        }
        const auto f = g.forgettings();
        out += g.label + "," + g.hash + "," + std::to_string(g.runs.size()) + "," + stat_cells(summarize(g.accuracies())) +
               "," + (f.empty() ? std::string(",") : stat_cells(summarize(f))) + "," + stat_cells(summarize(fta)) + "," +
               stat_cells(summarize(cta)) + "," + percent(summarize(zs).mean) + "\n";
    }
    return out;
}

std::string curves_csv(const std::vector<Group>& groups) {
    std::string out = "method,checkpoint,session,mean_accuracy,std\n";
    for (const auto& g : groups) {
        for (auto tag : {metrics::Checkpoint::post_supervised, metrics::Checkpoint::post_ttl}) {
            const std::size_t sessions = g.runs.front().post_ttl.tasks();
            for (std::size_t i = 0; i < sessions; ++i) {
                std::vector<double> v;
                for (const auto& r : g.runs) {
                    const auto& row = (tag == metrics::Checkpoint::post_ttl ? r.post_ttl : r.post_supervised).row(i);
                    double sum = 0.0;
                    for (double a : row) sum += a;
                    v.push_back(sum / static_cast<double>(row.size()));
                }
                const Stat s = summarize(v);
                out += g.label + "," + std::string(metrics::checkpoint_name(tag)) + "," + std::to_string(i) + "," +
                       format_number(s.mean) + "," + (s.std ? format_number(*s.std) : std::string()) + "\n";
            }
        }
    }
    return out;
}

std::string forgetting_csv(const std::vector<Group>& groups) {
    std::string out = "method,task,forgetting,std\n";
    for (const auto& g : groups) {
        const std::size_t t = g.runs.front().post_ttl.tasks();
        for (std::size_t i = 0; i + 1 < t; ++i) {
            std::vector<double> v;
            for (const auto& r : g.runs) v.push_back(r.post_ttl.at(i, i) - r.post_ttl.at(t - 1, i));
            const Stat s = summarize(v);
            out += g.label + "," + std::to_string(i) + "," + format_number(s.mean) + "," +
                   (s.std ? format_number(*s.std) : std::string()) + "\n";
        }
    }
    return out;
}

void write_report(const std::filesystem::path& dir, const std::vector<Group>& groups) {
    std::filesystem::create_directories(dir);
    write_text(dir / "summary.csv", summary_csv(groups));
    write_text(dir / "curves.csv", curves_csv(groups));
    write_text(dir / "forgetting.csv", forgetting_csv(groups));
}

Verdict forgetting_trend(const Group& method, const Group& baseline) {
    Verdict v;
    v.name = "forgetting reduction: " + method.label + " vs " + baseline.label;
    const double fm = median(method.forgettings()), fb = median(baseline.forgettings());
    const double am = median(method.accuracies()), ab = median(baseline.accuracies());
    v.pass = fm < fb && am > ab;
    v.detail = "median F. " + percent(fm) + " vs " + percent(fb) + ", median Acc. " + percent(am) + " vs " + percent(ab);
    return v;
}

Verdict ladder_trend(const Group& method, const Group& single, const Group& teacher_student) {
    Verdict v;
    v.name = "ablation ladder: " + method.label + " vs " + single.label + " and " + teacher_student.label;
    std::map<std::uint64_t, double> single_acc;
    for (const auto& r : single.runs) single_acc[r.manifest.seed] = r.metrics.average_accuracy;
    std::size_t paired = 0, wins = 0;
    for (const auto& r : method.runs) {
        auto it = single_acc.find(r.manifest.seed);
        if (it == single_acc.end()) continue;
        ++paired;
        wins += r.metrics.average_accuracy > it->second;
    }
    // 4 of 5, scaled
    const std::size_t needed = (4 * paired + 4) / 5;
    const double mm = median(method.accuracies()), mt = median(teacher_student.accuracies());
    v.pass = paired > 0 && wins >= needed && mm >= mt;
    v.detail = "strictly above in " + std::to_string(wins) + "/" + std::to_string(paired) + " seeds (need " +
               std::to_string(needed) + "), median Acc. " + percent(mm) + " vs " + percent(mt);
    return v;
}

Verdict momentum_trend(const Group& single, const Group& dual) {
    Verdict v;
    v.name = "momentum sensitivity: " + single.label + " vs " + dual.label;
    const double ms = median(single.accuracies()), md = median(dual.accuracies());
    v.pass = ms < md;
    v.detail = "median Acc. " + percent(ms) + " vs " + percent(md);
    return v;
}

std::string format_verdict(const Verdict& v) { return std::string(v.pass ? "PASS" : "FAIL") + "  " + v.name + "  (" + v.detail + ")"; }

}  // namespace cttl::report

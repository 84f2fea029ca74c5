// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "checks.hpp"
#include "cttl/data.hpp"
#include "cttl/ema.hpp"
#include "cttl/harness.hpp"
#include "cttl/metrics.hpp"
#include "cttl/report.hpp"

using namespace cttl;
using model::ClassId;

namespace {

double nearest_centroid_accuracy(const data::LabeledSet& train, const data::LabeledSet& test, std::size_t classes) {
    const auto y = train.all_labels(data::LabelPurpose::training, nullptr);
    const std::size_t d = train.features().cols();
    std::vector<std::vector<double>> mean(classes, std::vector<double>(d, 0.0));
    std::vector<double> n(classes, 0.0);
    for (std::size_t r = 0; r < train.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) mean[y[r]][c] += train.features().at(r, c);
        n[y[r]] += 1.0;
    }
    for (std::size_t k = 0; k < classes; ++k)
        for (auto& v : mean[k]) v /= std::max(1.0, n[k]);
    const auto ty = test.all_labels(data::LabelPurpose::evaluation, nullptr);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t k = 0; k < classes; ++k) {
            if (n[k] == 0.0) continue;
            double dist = 0.0;
            for (std::size_t c = 0; c < d; ++c) dist += std::pow(test.features().at(r, c) - mean[k][c], 2);
            if (dist < best_d) best_d = dist, best = k;
        }
        correct += best == ty[r];
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(Tasks, CentroidOracleSeparates) {
    data::SyntheticTaskSpec spec;
    spec.cluster_separation = 10.0;
    spec.noise_sigma = 0.01;
    const auto sched = data::generate_tasks(spec);
    for (const auto& s : sched.sessions)
        EXPECT_GE(nearest_centroid_accuracy(s.train, s.holdout, spec.total_classes), 0.99) << "session " << s.index;
}

TEST(Tasks, SameSeedBitIdentical) {
    data::SyntheticTaskSpec spec;
    spec.seed = 12;
    const auto a = data::generate_tasks(spec);
    const auto b = data::generate_tasks(spec);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_TRUE(a.class_vectors.same_values(b.class_vectors));
    for (std::size_t s = 0; s < a.size(); ++s) {
        EXPECT_TRUE(a.sessions[s].train.features().same_values(b.sessions[s].train.features()));
        EXPECT_TRUE(a.sessions[s].holdout.features().same_values(b.sessions[s].holdout.features()));
        EXPECT_TRUE(a.sessions[s].stream.features().same_values(b.sessions[s].stream.features()));
        EXPECT_EQ(a.sessions[s].stream.ids(), b.sessions[s].stream.ids());
        EXPECT_EQ(a.sessions[s].stream_truth.labels(nullptr), b.sessions[s].stream_truth.labels(nullptr));
    }
    spec.seed = 13;
    EXPECT_FALSE(data::generate_tasks(spec).sessions[0].train.features().same_values(a.sessions[0].train.features()));
}

TEST(Tasks, DisjointClassesAndInstances) {
    const auto sched = data::generate_tasks(data::SyntheticTaskSpec{});
    std::set<ClassId> classes;
    std::set<data::InstanceId> stream, holdout, train;
    for (const auto& s : sched.sessions) {
        for (ClassId c : s.classes) EXPECT_TRUE(classes.insert(c).second) << "class " << c << " reused";
        stream.insert(s.stream.ids().begin(), s.stream.ids().end());
        holdout.insert(s.holdout.ids().begin(), s.holdout.ids().end());
        train.insert(s.train.ids().begin(), s.train.ids().end());
        // the stream covers every seen class and nothing else
        const auto seen = sched.seen_classes(s.index);
        std::vector<ClassId> keys;
        for (const auto& [c, n] : s.stream_counts) keys.push_back(c);
        EXPECT_EQ(keys, seen);
    }
    for (auto id : stream) {
        EXPECT_FALSE(holdout.count(id));
        EXPECT_FALSE(train.count(id));
    }
    for (auto id : holdout) EXPECT_FALSE(train.count(id));
}

TEST(Tasks, RejectsImpossibleSpecs) {
    data::SyntheticTaskSpec spec;
    spec.tasks = 6;
    EXPECT_THROW(data::generate_tasks(spec), std::invalid_argument);
    spec = {};
    spec.alignment = 1.5;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Tasks, DomainsMultiplySessions) {
    data::SyntheticTaskSpec spec;
    spec.total_classes = 40;
    spec.domains = 2;
    EXPECT_EQ(data::generate_tasks(spec).size(), 10u);
}

TEST(Tasks, StreamBlockedOrderGroupsTasks) {
    data::SyntheticTaskSpec spec;
    spec.stream_order = data::StreamOrder::task_blocked;
    const auto sched = data::generate_tasks(spec);
    const auto labels = sched.sessions[2].stream_truth.labels(nullptr);
    for (std::size_t i = 1; i < labels.size(); ++i) EXPECT_LE(labels[i - 1] / 4, labels[i] / 4);
}

TEST(Dirichlet, LargeAlphaIsNearUniform) {
    Rng rng(1);
    const std::vector<ClassId> cls{0, 1, 2, 3, 4};
    const auto c = data::sample_imbalanced_ttl(cls, 1000, 1e6, rng);
    for (double p : c.proportions) EXPECT_NEAR(p, 0.2, 0.01);
}

TEST(Dirichlet, SmallAlphaIsSkewed) {
    const std::vector<ClassId> cls{0, 1, 2, 3, 4};
    int skewed = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng = make_rng(seed, "dirichlet");
        const auto c = data::sample_imbalanced_ttl(cls, 100, 0.1, rng);
        skewed += *std::min_element(c.proportions.begin(), c.proportions.end()) < 0.05;
        EXPECT_NEAR(std::accumulate(c.proportions.begin(), c.proportions.end(), 0.0), 1.0, 1e-12);
    }
    EXPECT_GE(skewed, 80);
}

TEST(Dirichlet, ScheduleUsesImbalancedCounts) {
    data::SyntheticTaskSpec spec;
    spec.imbalance = data::Imbalance::dirichlet;
    spec.dirichlet_alpha = 0.2;
    const auto sched = data::generate_tasks(spec);
    const auto& counts = sched.sessions[0].stream_counts;
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [_, n] : counts) lo = std::min(lo, n), hi = std::max(hi, n);
    EXPECT_LT(lo, hi);
    EXPECT_THROW({
        Rng r(0);
        data::sample_imbalanced_ttl(std::vector<ClassId>{0}, 10, 0.0, r);
    }, std::invalid_argument);
}

TEST(Replay, ReservoirKeepsCapacity) {
    data::ReplayBuffer buf(10, 3);
    for (data::InstanceId i = 0; i < 100; ++i) buf.insert({{double(i)}, 0, i});
    EXPECT_EQ(buf.size(), 10u);
    EXPECT_EQ(buf.insertions(), 100u);
    const auto picks = buf.sample(6);
    EXPECT_EQ(std::set<std::size_t>(picks.begin(), picks.end()).size(), 6u);
    EXPECT_EQ(buf.sample(50).size(), 10u);
    data::ReplayBuffer none(0, 3);
    none.insert({{1.0}, 0, 1});
    EXPECT_TRUE(none.empty());
}

TEST(Replay, ReservoirIsRoughlyUniform) {
    std::vector<int> hits(100, 0);
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        data::ReplayBuffer buf(10, seed);
        for (data::InstanceId i = 0; i < 100; ++i) buf.insert({{}, 0, i});
        for (const auto& item : buf.items()) ++hits[item.id];
    }
    // expected 40 hits per id
    for (int h : hits) {
        EXPECT_GT(h, 15);
        EXPECT_LT(h, 70);
    }
}

TEST(Replay, ZeroCapacityMatchesNoBuffer) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    auto sched = data::generate_tasks(cfg.data);
    const auto off = harness::knobs_for(harness::Variant::dosapp, 0);
    auto on = off;
    on.buffer_capacity = 5;
    auto a = harness::init_learner(cfg, 0);
    auto b = harness::init_learner(cfg, 0);
    b.buffer = data::ReplayBuffer(0, 9);
    for (std::size_t s = 0; s < 2; ++s) {
        a.table.activate(sched.sessions[s].classes);
        b.table.activate(sched.sessions[s].classes);
        const auto seen = sched.seen_classes(s);
        harness::run_supervised_session(a, sched.sessions[s], seen, cfg, off, 0);
        harness::run_supervised_session(b, sched.sessions[s], seen, cfg, on, 0);
    }
    EXPECT_TRUE(a.student.same_values(b.student));
    EXPECT_TRUE(a.teacher.same_values(b.teacher));
}

TEST(Replay, BufferChangesTraining) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    cfg.variant = harness::Variant::dosapp_er;
    cfg.buffer_capacity = 8;
    const auto er = harness::run_experiment(cfg, 0);
    cfg.variant = harness::Variant::dosapp;
    cfg.buffer_capacity = 0;
    const auto plain = harness::run_experiment(cfg, 0);
    EXPECT_EQ(er.final_state.buffer.size(), 8u);
    EXPECT_TRUE(plain.final_state.buffer.empty());
    EXPECT_FALSE(er.final_state.student.same_values(plain.final_state.student));
}

TEST(Variants, KnobSemantics) {
    using harness::Variant;
    const auto ft = harness::knobs_for(Variant::finetune_no_ttl, 0);
    EXPECT_FALSE(ft.use_mask);
    EXPECT_EQ(ft.ttl, harness::TtlMode::none);
    EXPECT_EQ(ft.eval, harness::EvalModel::student);
    EXPECT_FALSE(ft.needs_teacher());
    const auto d = harness::knobs_for(Variant::dosapp, 0);
    EXPECT_TRUE(d.use_mask && d.use_union && d.dual_momentum);
    EXPECT_EQ(d.eval, harness::EvalModel::teacher);
    EXPECT_FALSE(harness::knobs_for(Variant::plus_union_single_momentum, 0).dual_momentum);
    EXPECT_TRUE(harness::knobs_for(Variant::plus_union_single_momentum, 0).use_union);
    EXPECT_FALSE(harness::knobs_for(Variant::plus_sparse, 0).use_union);
    EXPECT_EQ(harness::knobs_for(Variant::dosapp_er, 0).buffer_capacity, 200u);
    for (auto v : harness::all_variants()) EXPECT_EQ(harness::parse_variant(harness::variant_name(v)), v);
    EXPECT_THROW(harness::parse_variant("nope"), std::invalid_argument);
}

TEST(Supervised, FinetuneHasNoMaskAndTrainsEverything) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    cfg.variant = harness::Variant::finetune_no_ttl;
    auto sched = data::generate_tasks(cfg.data);
    auto state = harness::init_learner(cfg, 0);
    const ParameterSet before = state.student;
    const ParameterSet teacher = state.teacher;
    state.table.activate(sched.sessions[0].classes);
    const auto res = harness::run_supervised_session(state, sched.sessions[0], sched.seen_classes(0), cfg,
                                                     harness::knobs_for(cfg.variant, 0), 0);
    EXPECT_FALSE(res.mask);
    EXPECT_TRUE(state.history.empty());
    EXPECT_TRUE(state.teacher.same_values(teacher));
    for (const auto& [path, t] : state.student.entries())
        if (path.find("weight") != std::string::npos) {
            EXPECT_FALSE(t.same_values(before.at(path))) << path;
        }
}

TEST(Supervised, DosappTouchesOnlyTheMask) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    auto sched = data::generate_tasks(cfg.data);
    auto state = harness::init_learner(cfg, 0);
    const ParameterSet before = state.student;
    state.table.activate(sched.sessions[0].classes);
    const auto res = harness::run_supervised_session(state, sched.sessions[0], sched.seen_classes(0), cfg,
                                                     harness::knobs_for(cfg.variant, 0), 0);
    ASSERT_TRUE(res.mask);
    EXPECT_EQ(state.history.size(), 1u);
    EXPECT_EQ(res.steps, cfg.epochs * 2);
    for (const auto& [path, t] : state.student.entries()) {
        const auto* bits = res.mask->contains(path) ? &res.mask->bits.at(path) : nullptr;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (!bits || !(*bits)[i]) {
                ASSERT_EQ(t[i], before.at(path)[i]) << path;
            }
    }
}

TEST(Supervised, GatedSessionIsNoOp) {
    // all-zero mask: the optimizer touches nothing and the teacher blends
    // with an identical student
    harness::ExperimentConfig cfg = checks::tiny_config();
    auto sched = data::generate_tasks(cfg.data);
    auto state = harness::init_learner(cfg, 0);
    const auto& train = sched.sessions[0].train;
    state.table.activate(sched.sessions[0].classes);
    const ParameterSet s0 = state.student, t0 = state.teacher;
    const Mask none = Mask::filled(state.student, 0);
    ad::Optimizer opt(cfg.optimizer);
    const auto sv = ema::compute_pq(state.student, none, cfg.ema);
    const auto labels = train.all_labels(data::LabelPurpose::training, nullptr);
    ad::Graph g;
    g.backward(model::model_loss(g, state.student, state.table, train.features(), labels, sched.sessions[0].classes,
                                 cfg.logits, model::GradScope::candidates));
    opt.step(state.student, &none);
    ema::ema_update(state.teacher, state.student, sv);
    EXPECT_TRUE(state.student.same_values(s0));
    EXPECT_TRUE(state.teacher.same_values(t0));
}

TEST(Supervised, TwoClassTaskGainsTwentyPoints) {
    // A random encoder with unrelated class geometry, so the zero-shot start
    // sits near chance and the session has room to show its gain.
    std::vector<double> gains;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        harness::ExperimentConfig cfg;
        cfg.data.total_classes = 2;
        cfg.data.tasks = 1;
        cfg.data.classes_per_task = 2;
        cfg.data.alignment = 0.0;
        cfg.data.seed = seed;
        cfg.pretrain.classes = 0;
        const auto r = harness::run_experiment(cfg, seed);
        gains.push_back(r.post_supervised.at(0, 0) - r.zero_shot_accuracy);
    }
    EXPECT_GE(median_of(gains), 0.20);
}

TEST(Evaluate, FreshCloneRowsMatch) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    const auto sched = data::generate_tasks(cfg.data);
    auto state = harness::init_learner(cfg, 0);
    state.table = model::ClassEmbeddingTable(sched.class_vectors);
    const auto s = harness::evaluate(state.student, state.table, sched, 2, cfg.logits, 7);
    const auto t = harness::evaluate(state.teacher, state.table, sched, 2, cfg.logits, 7);
    EXPECT_EQ(s, t);
    EXPECT_EQ(s.size(), 3u);
}

TEST(Evaluate, WiderClassSetNeverHelps) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    const auto sched = data::generate_tasks(cfg.data);
    auto consumed = data::generate_tasks(cfg.data);
    const auto r = harness::run_experiment(cfg, consumed, 0);
    const auto& p = r.final_state.student;
    const auto& table = r.final_state.table;
    for (std::size_t i = 1; i < sched.size(); ++i) {
        const auto narrow = sched.seen_classes(i - 1);
        const auto wide = sched.seen_classes(i);
        for (std::size_t j = 0; j < i; ++j) {
            const double a = harness::accuracy(p, table, sched.sessions[j].holdout, narrow, cfg.logits, 16);
            const double b = harness::accuracy(p, table, sched.sessions[j].holdout, wide, cfg.logits, 16);
            EXPECT_LE(b, a) << "task " << j << " at session " << i;
        }
    }
}

TEST(Evaluate, PerfectClassifierRowOfOnes) {
    harness::ExperimentConfig cfg = checks::tiny_config();
    cfg.data.noise_sigma = 1e-4;
    cfg.data.cluster_separation = 20.0;
    const auto sched = data::generate_tasks(cfg.data);
    const auto params = model::init_model(cfg.encoder, 3);
    // class vectors placed on each class's embedded training mean
    Tensor v({cfg.data.total_classes, cfg.encoder.embed_dim}, 0.0);
    for (const auto& s : sched.sessions) {
        const Tensor z = model::encode(params, s.train.features());
        const auto y = s.train.all_labels(data::LabelPurpose::training, nullptr);
        for (std::size_t r = 0; r < z.rows(); ++r)
            for (std::size_t c = 0; c < z.cols(); ++c) v.at(y[r], c) += z.at(r, c);
    }
    for (std::size_t k = 0; k < v.rows(); ++k) {
        double n = 0.0;
        for (std::size_t c = 0; c < v.cols(); ++c) n += v.at(k, c) * v.at(k, c);
        for (std::size_t c = 0; c < v.cols(); ++c) v.at(k, c) /= std::sqrt(n);
    }
    const model::ClassEmbeddingTable table(v);
    const auto row = harness::evaluate(params, table, sched, sched.size() - 1, cfg.logits, 16);
    for (double a : row) EXPECT_EQ(a, 1.0);
}

TEST(Metrics, Fixtures) {
    const auto r = checks::metric_fixtures();
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Metrics, NegativeForgettingAndSingleTask) {
    metrics::ResultMatrix r(2);
    r.push_row({0.5});
    r.push_row({0.7, 0.6});
    EXPECT_LT(*metrics::compute_metrics(r).forgetting, 0.0);
    metrics::ResultMatrix one(1);
    one.push_row({0.4});
    const auto m = metrics::compute_metrics(one);
    EXPECT_FALSE(m.forgetting);
    EXPECT_EQ(m.average_accuracy, 0.4);
}

TEST(Metrics, RowValidation) {
    metrics::ResultMatrix r(2);
    EXPECT_THROW(r.push_row({0.5, 0.5}), std::invalid_argument);
    EXPECT_THROW(r.push_row({1.5}), std::invalid_argument);
    r.push_row({0.5});
    EXPECT_THROW(metrics::compute_metrics(r), std::invalid_argument);
    EXPECT_THROW(r.at(0, 1), std::out_of_range);
}

TEST(Metrics, CrossCheckAgainstPersistedMatrix) {
    const auto rc = checks::tiny_run_config();
    const auto result = harness::run_experiment(rc.experiment, 1);
    // recompute from the CSV text, as a spreadsheet would
    const std::string csv = report::r_matrix_csv(result.post_ttl);
    std::vector<std::vector<double>> rows;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        std::string line = csv.substr(pos, end - pos);
        pos = end + 1;
        std::vector<double> cells;
        std::size_t c = 0;
        for (int field = 0; c != std::string::npos; ++field) {
            const std::size_t next = line.find(',', c);
            const std::string cell = line.substr(c, next == std::string::npos ? std::string::npos : next - c);
            if (field >= 2 && !cell.empty()) cells.push_back(std::stod(cell));
            c = next == std::string::npos ? next : next + 1;
        }
        rows.push_back(cells);
    }
    ASSERT_EQ(rows.size(), 3u);
    const auto& last = rows.back();
    const double acc = (last[0] + last[1] + last[2]) / 3.0;
    const double fgt = -((last[0] - rows[0][0]) + (last[1] - rows[1][1])) / 2.0;
    EXPECT_NEAR(result.metrics.average_accuracy, acc, 1e-12);
    EXPECT_NEAR(*result.metrics.forgetting, fgt, 1e-12);
}

TEST(Experiment, Deterministic) {
    const auto cfg = checks::tiny_config();
    const auto a = harness::run_experiment(cfg, 4);
    const auto b = harness::run_experiment(cfg, 4);
    EXPECT_EQ(a.post_ttl.rows(), b.post_ttl.rows());
    EXPECT_EQ(a.post_supervised.rows(), b.post_supervised.rows());
    EXPECT_TRUE(a.final_state.teacher.same_values(b.final_state.teacher));
}

TEST(Experiment, LeakageAudit) {
    for (auto v : {harness::Variant::dosapp, harness::Variant::self_label, harness::Variant::dosapp_er}) {
        auto cfg = checks::tiny_config();
        cfg.variant = v;
        const auto r = checks::leakage_audit(cfg, 2);
        EXPECT_TRUE(r.pass) << harness::variant_name(v) << ": " << r.detail;
    }
}

TEST(Experiment, FinetuneHasNoTtl) {
    auto cfg = checks::tiny_config();
    cfg.variant = harness::Variant::finetune_no_ttl;
    const auto r = harness::run_experiment(cfg, 0);
    for (const auto& s : r.sessions) {
        EXPECT_FALSE(s.ttl);
        EXPECT_EQ(s.post_ttl_row, s.post_supervised_row);
    }
}

TEST(Experiment, ConfigValidation) {
    auto cfg = checks::tiny_config();
    cfg.encoder.embed_dim = 12;
    EXPECT_THROW(harness::run_experiment(cfg, 0), std::invalid_argument);
    cfg = checks::tiny_config();
    cfg.sparsity = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = checks::tiny_config();
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

// Directional claim over the default sequence: the full method should match or
// beat the plain teacher-student setup on accuracy and forgetting.
TEST(VariantLadder, DosappNoWorseThanTeacherStudent) {
    std::vector<double> acc_d, acc_ts, fgt_d, fgt_ts;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        harness::ExperimentConfig cfg;
        const auto d = harness::run_experiment(cfg, seed);
        cfg.variant = harness::Variant::teacher_student_only;
        const auto ts = harness::run_experiment(cfg, seed);
        acc_d.push_back(d.metrics.average_accuracy);
        acc_ts.push_back(ts.metrics.average_accuracy);
        fgt_d.push_back(*d.metrics.forgetting);
        fgt_ts.push_back(*ts.metrics.forgetting);
    }
    EXPECT_GE(median_of(acc_d), median_of(acc_ts));
    EXPECT_LE(median_of(fgt_d), median_of(fgt_ts));
}

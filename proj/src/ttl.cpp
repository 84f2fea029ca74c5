// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/ttl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cttl/log.hpp"

namespace cttl::ttl {

namespace {

std::size_t first_argmax(std::span<const double> row) {
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double histogram_entropy(const std::map<ClassId, std::size_t>& hist, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (const auto& [_, n] : hist) {
        if (n == 0) continue;
        const double p = static_cast<double>(n) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

RoutingDecision route_pseudo_label(LogitRow teacher, LogitRow student) {
    if (teacher.logits.empty() || teacher.logits.size() != student.logits.size() ||
        teacher.classes.size() != teacher.logits.size() || student.classes.size() != student.logits.size() ||
        !std::equal(teacher.classes.begin(), teacher.classes.end(), student.classes.begin())) {
        throw std::invalid_argument("route_pseudo_label: teacher and student logits cover different class sets");
    }
    const std::size_t ti = first_argmax(teacher.logits);
    const std::size_t si = first_argmax(student.logits);
    RoutingDecision d;
    d.teacher_max = teacher.logits[ti];
    d.student_max = student.logits[si];
    if (d.teacher_max >= d.student_max) {
        d.source = Source::teacher;
        d.pseudo_label = teacher.classes[ti];
    } else {
        d.source = Source::student;
        d.pseudo_label = student.classes[si];
    }
    return d;
}

void TtlStreamConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("ttl: batch_size must be positive");
    if (class_set.empty()) throw std::invalid_argument("ttl: empty class set");
    if (!std::is_sorted(class_set.begin(), class_set.end()) ||
        std::adjacent_find(class_set.begin(), class_set.end()) != class_set.end()) {
        throw std::invalid_argument("ttl: class set must be strictly ascending");
    }
    if (!single_pass) throw std::invalid_argument("ttl: test-time data is processed in a single pass only");
}

double TtlReport::teacher_fraction() const {
    double n = 0.0, t = 0.0;
    for (const auto& b : batches) {
        n += static_cast<double>(b.batch_size);
        t += b.teacher_fraction * static_cast<double>(b.batch_size);
    }
    return n > 0.0 ? t / n : 0.0;
}

double TtlReport::student_fraction() const {
    double n = 0.0, s = 0.0;
    for (const auto& b : batches) {
        n += static_cast<double>(b.batch_size);
        s += b.student_fraction * static_cast<double>(b.batch_size);
    }
    return n > 0.0 ? s / n : 0.0;
}

TtlReport ttl_session(ParameterSet& student, ParameterSet& teacher, const Mask* mask, data::UnlabeledStream& stream,
                      const TtlStreamConfig& cfg, const TtlContext& ctx) {
    cfg.validate();
    if (ctx.table == nullptr) throw std::invalid_argument("ttl: missing class table");
    TtlReport report;
    if (stream.empty()) {
        log::warn("ttl: empty test-time stream; session skipped");
        return report;
    }
    const bool use_teacher = ctx.update_teacher || cfg.routing == RoutingMode::max_logit;
    if (use_teacher && !teacher.same_structure(student)) {
        throw std::invalid_argument("ttl: teacher and student differ in structure");
    }
    stream.begin_pass();

    ad::Optimizer opt(ctx.optimizer);
    ema::EmaConfig ema_cfg = ctx.ema;
    ema_cfg.phase = ema::Phase::ttl;
    ema::SmoothingVectors sv;
    if (ctx.update_teacher) sv = mask ? ema::compute_pq(student, *mask, ema_cfg) : ema::uniform_pq(student, ema_cfg.delta);
    const model::GradScope scope = mask ? model::GradScope::candidates : model::GradScope::all;
    const auto& classes = cfg.class_set;
    const std::size_t n_cls = classes.size();
    const Tensor& features = stream.features();
    const auto& ids = stream.ids();

    for (std::size_t begin = 0, batch = 0; begin < stream.size(); begin += cfg.batch_size, ++batch) {
        const std::size_t end = std::min(stream.size(), begin + cfg.batch_size);
        const Tensor x = model::slice_rows(features, begin, end);
        Tensor teacher_z;
        if (cfg.routing == RoutingMode::max_logit) teacher_z = model::logits(teacher, *ctx.table, x, classes, ctx.logits);

        student.clear_grads();
        ad::Graph g;
        ad::Var z = model::logits(g, student, *ctx.table, x, classes, ctx.logits, scope);
        const Tensor& student_z = g.value(z);

        TtlBatchRecord rec;
        rec.batch_index = batch;
        rec.batch_size = end - begin;
        std::vector<std::size_t> rows;
        std::vector<std::size_t> label_cols;
        std::vector<data::InstanceId> used;
        std::map<ClassId, std::size_t> hist;
        std::size_t from_teacher = 0;
        double sum_t = 0.0, sum_s = 0.0;
        for (std::size_t r = 0; r < rec.batch_size; ++r) {
            LogitRow srow{std::span<const double>(student_z.data()).subspan(r * n_cls, n_cls), classes};
            RoutingDecision d;
            if (cfg.routing == RoutingMode::max_logit) {
                LogitRow trow{std::span<const double>(teacher_z.data()).subspan(r * n_cls, n_cls), classes};
                d = route_pseudo_label(trow, srow);
            } else {
                const std::size_t si = first_argmax(srow.logits);
                d.source = Source::student;
                d.pseudo_label = classes[si];
                d.student_max = d.teacher_max = srow.logits[si];
            }
            sum_t += d.teacher_max;
            sum_s += d.student_max;
            from_teacher += d.source == Source::teacher;
            const double accepted_max = d.source == Source::teacher ? d.teacher_max : d.student_max;
            if (accepted_max < cfg.confidence_threshold) continue;
            rows.push_back(r);
            label_cols.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), d.pseudo_label) -
                                                          classes.begin()));
            used.push_back(ids[begin + r]);
            ++hist[d.pseudo_label];
        }
        const double bs = static_cast<double>(rec.batch_size);
        rec.accepted = rows.size();
        rec.teacher_fraction = static_cast<double>(from_teacher) / bs;
        rec.student_fraction = 1.0 - rec.teacher_fraction;
        rec.mean_teacher_max_logit = sum_t / bs;
        rec.mean_student_max_logit = sum_s / bs;
        rec.pseudo_label_entropy = histogram_entropy(hist, rows.size());
        report.samples += rec.batch_size;

        if (!rows.empty()) {
            ad::Var zz = rows.size() == rec.batch_size ? z : g.gather_rows(z, rows);
            g.backward(g.cross_entropy(zz, std::move(label_cols)));
            if (ctx.audit) ctx.audit->record_gradient(data::Split::stream, used);
            opt.step(student, mask);
            ++report.steps;
            if (ctx.update_teacher) ema::ema_update(teacher, student, sv);
        }
        report.batches.push_back(rec);
    }
    student.clear_grads();
    return report;
}

}  // namespace cttl::ttl

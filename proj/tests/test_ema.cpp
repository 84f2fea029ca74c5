// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "checks.hpp"
#include "cttl/checkpoint.hpp"
#include "cttl/ema.hpp"
#include "cttl/model.hpp"
#include "cttl/rng.hpp"

using namespace cttl;

namespace {

ParameterSet scalar(double v, bool candidate = true) {
    ParameterSet p;
    p.add("w", Tensor({1}, std::vector<double>{v}), candidate);
    return p;
}

Mask bit(std::uint8_t b) {
    Mask m;
    m.bits["w"] = {b};
    return m;
}

}  // namespace

TEST(ComputePq, MaskedEntryUsesPhaseMomentum) {
    ema::EmaConfig cfg;
    const auto sv = ema::compute_pq(scalar(0.0), bit(1), cfg);
    EXPECT_DOUBLE_EQ(sv.p.at("w")[0], 0.8);
    EXPECT_DOUBLE_EQ(sv.q.at("w")[0], 0.2);
    cfg.phase = ema::Phase::ttl;
    const auto tv = ema::compute_pq(scalar(0.0), bit(1), cfg);
    EXPECT_DOUBLE_EQ(tv.p.at("w")[0], 0.9);
    EXPECT_DOUBLE_EQ(tv.q.at("w")[0], 0.1);
}

TEST(ComputePq, UnmaskedEntryUsesDelta) {
    for (const double d : {0.5, 0.9, 0.9999}) {
        ema::EmaConfig cfg;
        cfg.delta = d;
        const auto sv = ema::compute_pq(scalar(0.0), bit(0), cfg);
        EXPECT_EQ(sv.p.at("w")[0], d);
        EXPECT_EQ(sv.q.at("w")[0], 1.0 - d);
        // parameters the mask does not name behave as m = 0
        const auto nv = ema::compute_pq(scalar(0.0, false), Mask{}, cfg);
        EXPECT_EQ(nv.p.at("w")[0], d);
    }
}

TEST(ComputePq, SingleMomentumIsUniform) {
    Rng rng(2);
    const auto params = model::init_model(model::EncoderConfig{}, 1);
    Mask m = Mask::filled(params, 0);
    std::bernoulli_distribution b(0.3);
    for (auto& [_, bits] : m.bits)
        for (auto& x : bits) x = b(rng);
    ema::EmaConfig cfg;
    cfg.delta = cfg.gamma = cfg.lambda = 0.95;
    const auto sv = ema::compute_pq(params, m, cfg);
    for (const auto& [path, p] : sv.p)
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_EQ(p[i], 0.95);
            EXPECT_EQ(sv.q.at(path)[i], 1.0 - 0.95);
        }
}

TEST(EmaUpdate, Examples) {
    auto t = scalar(1.0);
    const auto s = scalar(0.0);
    ema::SmoothingVectors sv;
    sv.p["w"] = {0.8};
    sv.q["w"] = {0.2};
    ema::ema_update(t, s, sv);
    EXPECT_DOUBLE_EQ(t.at("w")[0], 0.8);

    auto fixed = scalar(0.3);
    ema::ema_update(fixed, scalar(0.3), sv);
    EXPECT_EQ(fixed.at("w")[0], 0.3);

    auto frozen = scalar(0.3);
    sv.p["w"] = {1.0};
    sv.q["w"] = {0.0};
    ema::ema_update(frozen, scalar(-7.0), sv);
    EXPECT_EQ(frozen.at("w")[0], 0.3);
}

TEST(EmaUpdate, RejectsMismatchedStructure) {
    auto t = scalar(1.0);
    ParameterSet other;
    other.add("v", Tensor({1}, 0.0), true);
    EXPECT_THROW(ema::ema_update(t, other, ema::uniform_pq(other, 0.9)), std::invalid_argument);
}

TEST(EmaUpdate, Convexity) {
    Rng rng(4);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::bernoulli_distribution b(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        auto teacher = model::init_model(model::EncoderConfig{}, 1);
        auto student = model::init_model(model::EncoderConfig{}, 2);
        Mask m = Mask::filled(student, 0);
        for (auto& [_, bits] : m.bits)
            for (auto& x : bits) x = b(rng);
        ema::EmaConfig cfg;
        cfg.delta = u(rng);
        cfg.gamma = u(rng);
        cfg.lambda = u(rng);
        const ParameterSet before = teacher;
        ema::ema_update(teacher, student, ema::compute_pq(student, m, cfg));
        for (const auto& [path, t] : teacher.entries()) {
            const auto& t0 = before.at(path);
            const auto& s = student.at(path);
            for (std::size_t i = 0; i < t.size(); ++i) {
                EXPECT_GE(t[i], std::min(t0[i], s[i]));
                EXPECT_LE(t[i], std::max(t0[i], s[i]));
            }
        }
    }
}

TEST(EmaUpdate, TtlMovesMaskedEntriesLess) {
    ema::EmaConfig cfg;  // gamma < lambda < delta
    const auto student = scalar(1.0);
    auto sup = scalar(0.0);
    auto ttl = scalar(0.0);
    ema::ema_update(sup, student, ema::compute_pq(student, bit(1), cfg));
    cfg.phase = ema::Phase::ttl;
    ema::ema_update(ttl, student, ema::compute_pq(student, bit(1), cfg));
    EXPECT_LT(std::abs(ttl.at("w")[0]), std::abs(sup.at("w")[0]));
}

TEST(Clone, NoAliasing) {
    auto student = model::init_model(model::EncoderConfig{}, 3);
    const ParameterSet snapshot = student;
    const ParameterSet teacher = ema::clone_student_to_teacher(student);
    for (auto& [_, t] : student.entries()) t[0] += 1.0;
    EXPECT_TRUE(teacher.same_values(snapshot));
    EXPECT_TRUE(ema::clone_student_to_teacher(teacher).same_values(teacher));
}

TEST(Clone, CheckpointRoundTrip) {
    const auto teacher = ema::clone_student_to_teacher(model::init_model(model::EncoderConfig{}, 3));
    std::stringstream buf;
    io::write_parameters(buf, teacher);
    const auto back = io::read_parameters(buf);
    EXPECT_TRUE(back.same_values(teacher));
    EXPECT_TRUE(back.same_structure(teacher));
}

TEST(EmaConfig, Validation) {
    ema::EmaConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.delta = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.delta = 0.9999;
    cfg.gamma = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(EmaProperties, PqSumsToOne) {
    const auto r = checks::ema_pq_sums(1000, 0);
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(EmaProperties, SingleMomentumMatchesOracle) {
    const auto r = checks::ema_single_momentum_oracle(100, 0);
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(EmaProperties, NonCandidateClosedForm) {
    const auto r = checks::ema_closed_form(1000, 0);
    EXPECT_TRUE(r.pass) << r.detail;
}

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/ema.hpp"

#include <sstream>
#include <stdexcept>

#include "cttl/log.hpp"

namespace cttl::ema {

void EmaConfig::validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_unit(delta) || !in_unit(gamma) || !in_unit(lambda)) {
        std::ostringstream os;
        os << "ema: momenta must lie in (0,1), got delta=" << delta << " gamma=" << gamma << " lambda=" << lambda;
        throw std::invalid_argument(os.str());
    }
    if (!(gamma < lambda && lambda < delta)) {
        std::ostringstream os;
        os << "ema: momenta delta=" << delta << " gamma=" << gamma << " lambda=" << lambda
           << " do not satisfy gamma < lambda < delta";
        log::warn(os.str());
    }
}

SmoothingVectors compute_pq(const ParameterSet& params, const Mask& mask, const EmaConfig& cfg) {
    const double delta = cfg.delta;
    const double mu = cfg.masked_momentum();
    SmoothingVectors sv;
    for (const auto& [path, t] : params.entries()) {
        auto& p = sv.p[path];
        auto& q = sv.q[path];
        auto it = mask.bits.find(path);
        if (it == mask.bits.end()) {
            p.assign(t.size(), delta);
            q.assign(t.size(), 1.0 - delta);
            continue;
        }
        if (it->second.size() != t.size()) throw std::invalid_argument("compute_pq: mask size mismatch for " + path);
        p.resize(t.size());
        q.resize(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double m = it->second[i] ? 1.0 : 0.0;
            p[i] = (mu - delta) * m + delta;
            q[i] = (delta - mu) * m + (1.0 - delta);
        }
    }
    return sv;
}

SmoothingVectors uniform_pq(const ParameterSet& params, double delta) {
    SmoothingVectors sv;
    for (const auto& [path, t] : params.entries()) {
        sv.p[path].assign(t.size(), delta);
        sv.q[path].assign(t.size(), 1.0 - delta);
    }
    return sv;
}

void ema_update(ParameterSet& teacher, const ParameterSet& student, const SmoothingVectors& sv) {
    if (!teacher.same_structure(student)) throw std::invalid_argument("ema_update: teacher and student differ in structure");
    for (auto& [path, t] : teacher.entries()) {
        auto pit = sv.p.find(path);
        auto qit = sv.q.find(path);
        if (pit == sv.p.end() || qit == sv.q.end() || pit->second.size() != t.size() || qit->second.size() != t.size()) {
            throw std::invalid_argument("ema_update: smoothing vectors not aligned with '" + path + "'");
        }
        const auto& s = student.at(path);
        const auto& p = pit->second;
        const auto& q = qit->second;
        // equal entries are a fixed point of any p + q = 1 blend
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] != s[i]) t[i] = p[i] * t[i] + q[i] * s[i];
        }
    }
}

ParameterSet clone_student_to_teacher(const ParameterSet& student) {
    ParameterSet teacher = student;
    teacher.clear_grads();
    return teacher;
}

}  // namespace cttl::ema

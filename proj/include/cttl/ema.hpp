// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "cttl/params.hpp"

namespace cttl::ema {

enum class Phase { supervised, ttl };

// Teacher momenta. delta drives entries outside the active mask; gamma drives
// masked entries during supervised sessions and lambda during test-time
// sessions. The usual ordering is gamma < lambda < delta.
struct EmaConfig {
    double delta = 0.9999;
    double gamma = 0.8;
    double lambda = 0.9;
    Phase phase = Phase::supervised;

    // Throws unless every momentum lies in (0,1); logs a warning when the
    // ordering gamma < lambda < delta does not hold.
    void validate() const;
    double masked_momentum() const { return phase == Phase::supervised ? gamma : lambda; }
};

// Per-entry teacher (p) and student (q) weights, aligned with every parameter.
struct SmoothingVectors {
    std::map<std::string, std::vector<double>> p;
    std::map<std::string, std::vector<double>> q;
};

// p = (mu - delta) m + delta, q = (delta - mu) m + (1 - delta), where mu is the
// phase's masked momentum. Parameters absent from `mask` use m = 0.
SmoothingVectors compute_pq(const ParameterSet& params, const Mask& mask, const EmaConfig& cfg);

// EMA without a mask: p = delta, q = 1 - delta everywhere.
SmoothingVectors uniform_pq(const ParameterSet& params, double delta);

// teacher <- p * teacher + q * student on every parameter.
void ema_update(ParameterSet& teacher, const ParameterSet& student, const SmoothingVectors& sv);

ParameterSet clone_student_to_teacher(const ParameterSet& student);

}  // namespace cttl::ema

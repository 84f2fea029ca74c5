// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cttl/data.hpp"
#include "cttl/ema.hpp"
#include "cttl/model.hpp"
#include "cttl/optimizer.hpp"

namespace cttl::ttl {

using model::ClassId;

enum class Source { teacher, student };

struct RoutingDecision {
    ClassId pseudo_label = 0;
    Source source = Source::teacher;
    double teacher_max = 0.0;
    double student_max = 0.0;
};

// One model's logits for a sample, with the class id of each column.
struct LogitRow {
    std::span<const double> logits;
    std::span<const ClassId> classes;
};

// Picks the expert with the larger raw maximum logit (ties go to the teacher)
// and returns its argmax class.
RoutingDecision route_pseudo_label(LogitRow teacher, LogitRow student);

enum class RoutingMode {
    max_logit,  // teacher vs student by maximum logit
    self,       // student labels itself
};

struct TtlStreamConfig {
    std::size_t batch_size = 64;
    std::vector<ClassId> class_set;
    bool single_pass = true;
    std::uint64_t shuffle_seed = 0;
    RoutingMode routing = RoutingMode::max_logit;
    // samples whose accepted maximum logit falls below this are skipped
    double confidence_threshold = -std::numeric_limits<double>::infinity();

    void validate() const;
};

struct TtlBatchRecord {
    std::size_t batch_index = 0;
    std::size_t batch_size = 0;
    std::size_t accepted = 0;
    double teacher_fraction = 0.0;
    double student_fraction = 0.0;
    double mean_teacher_max_logit = 0.0;
    double mean_student_max_logit = 0.0;
    // entropy (nats) of the batch's pseudo-label histogram
    double pseudo_label_entropy = 0.0;
};

struct TtlReport {
    std::vector<TtlBatchRecord> batches;
    std::size_t samples = 0;
    std::size_t steps = 0;

    double teacher_fraction() const;
    double student_fraction() const;
};

// Everything a test-time session needs besides the two models and the stream.
struct TtlContext {
    const model::ClassEmbeddingTable* table = nullptr;
    model::LogitConfig logits;
    ad::OptimizerConfig optimizer;
    // phase is forced to ttl
    ema::EmaConfig ema;
    // false: the teacher is neither read for routing nor updated
    bool update_teacher = true;
    data::DataAudit* audit = nullptr;
};

// One online pass over `stream`: per batch, route pseudo labels, take one
// optimizer step on the student gated by `mask` (all parameters when null),
// then move the teacher with the test-time smoothing vectors.
TtlReport ttl_session(ParameterSet& student, ParameterSet& teacher, const Mask* mask, data::UnlabeledStream& stream,
                      const TtlStreamConfig& cfg, const TtlContext& ctx);

}  // namespace cttl::ttl

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cttl/data.hpp"
#include "cttl/ema.hpp"
#include "cttl/metrics.hpp"
#include "cttl/model.hpp"
#include "cttl/optimizer.hpp"
#include "cttl/sparse.hpp"
#include "cttl/ttl.hpp"

namespace cttl::harness {

using model::ClassId;

enum class Variant {
    dosapp,
    finetune_no_ttl,
    self_label,
    teacher_student_only,
    plus_sparse,
    plus_union_single_momentum,
    dosapp_er,
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

enum class TtlMode { none, teacher_student, self_label };
enum class EvalModel { teacher, student };

struct VariantKnobs {
    bool use_mask = true;
    bool use_union = true;
    bool dual_momentum = true;
    TtlMode ttl = TtlMode::teacher_student;
    EvalModel eval = EvalModel::teacher;
    std::size_t buffer_capacity = 0;

    bool needs_teacher() const { return eval == EvalModel::teacher || ttl == TtlMode::teacher_student; }
};

// dosapp_er falls back to a 200-sample buffer when `buffer_capacity` is 0;
// every other variant uses `buffer_capacity` as given.
VariantKnobs knobs_for(Variant v, std::size_t buffer_capacity);

// Which classes the supervised loss competes over.
enum class TrainScope { task, seen };

// Full-parameter training on pretext classes before the first session,
// standing in for a pretrained encoder. classes == 0 skips it.
struct PretrainConfig {
    std::size_t classes = 64;
    std::size_t per_class = 32;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 3e-3;

    void validate() const;
};

struct ExperimentConfig {
    Variant variant = Variant::dosapp;
    data::SyntheticTaskSpec data;
    model::EncoderConfig encoder;
    model::LogitConfig logits;
    ad::OptimizerConfig optimizer;
    ema::EmaConfig ema;
    PretrainConfig pretrain;
    double sparsity = 0.1;
    sparse::Granularity granularity = sparse::Granularity::per_layer;
    sparse::ReselectScore reselect = sparse::ReselectScore::max;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::size_t ttl_batch_size = 64;
    std::size_t buffer_capacity = 0;
    // 0 scores every training sample
    std::size_t score_sample_cap = 0;
    TrainScope train_scope = TrainScope::task;
    double ttl_confidence_threshold = -std::numeric_limits<double>::infinity();
    std::size_t eval_batch_size = 128;

    void validate() const;
};

// Student, teacher and everything carried across sessions.
struct LearnerState {
    ParameterSet student;
    ParameterSet teacher;
    model::ClassEmbeddingTable table;
    sparse::MaskHistory history;
    data::ReplayBuffer buffer;
};

// Fresh student from the "init" substream, pretrained when configured, teacher
// cloned from it, class table from the "classes" substream, buffer from the
// "replay" substream.
LearnerState init_learner(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains every parameter on the pretext set; returns the last batch loss.
double pretrain_encoder(ParameterSet& params, const data::PretextSet& pretext, const PretrainConfig& cfg,
                        const model::LogitConfig& logit_cfg, std::uint64_t seed);

struct SupervisedResult {
    std::optional<Mask> mask;
    std::optional<sparse::ScoreMap> scores;
    std::size_t steps = 0;
    double final_loss = 0.0;
};

// Scores and selects (mask variants), then trains the student for the
// configured epochs, moving the teacher after every step.
SupervisedResult run_supervised_session(LearnerState& state, const data::Session& session,
                                        std::span<const ClassId> seen_classes, const ExperimentConfig& cfg,
                                        const VariantKnobs& knobs, std::uint64_t seed, data::DataAudit* audit = nullptr);

// The mask that gates test-time updates; nullopt means every parameter.
std::optional<Mask> ttl_mask(const LearnerState& state, const ExperimentConfig& cfg, const VariantKnobs& knobs);

ttl::TtlReport run_ttl_session(LearnerState& state, data::Session& session, std::span<const ClassId> seen_classes,
                               const ExperimentConfig& cfg, const VariantKnobs& knobs, std::uint64_t seed,
                               data::DataAudit* audit = nullptr);

// Accuracy of `params` on one labelled set with logits restricted to `classes`.
double accuracy(const ParameterSet& params, const model::ClassEmbeddingTable& table, const data::LabeledSet& set,
                std::span<const ClassId> classes, const model::LogitConfig& logit_cfg, std::size_t batch_size,
                data::DataAudit* audit = nullptr);

// R[i, j] for j <= i on holdout j, logits restricted to Y_1..Y_i.
std::vector<double> evaluate(const ParameterSet& params, const model::ClassEmbeddingTable& table,
                             const data::SessionSchedule& schedule, std::size_t upto, const model::LogitConfig& logit_cfg,
                             std::size_t batch_size, data::DataAudit* audit = nullptr);

struct SessionLog {
    std::size_t session = 0;
    std::size_t supervised_steps = 0;
    double train_loss = 0.0;
    std::size_t mask_popcount = 0;
    std::size_t ttl_mask_popcount = 0;
    std::vector<double> post_supervised_row;
    std::vector<double> post_ttl_row;
    std::optional<ttl::TtlReport> ttl;
};

struct RunResult {
    metrics::ResultMatrix post_supervised;
    metrics::ResultMatrix post_ttl;
    metrics::Metrics metrics;
    metrics::Metrics post_supervised_metrics;
    // accuracy of the untrained model over every task, all classes active
    double zero_shot_accuracy = 0.0;
    std::vector<SessionLog> sessions;
    LearnerState final_state;
};

// Full alternating schedule: supervised session t, then test-time session t.
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, data::DataAudit* audit = nullptr);

// Same, on a prebuilt schedule (consumed in place).
RunResult run_experiment(const ExperimentConfig& cfg, data::SessionSchedule& schedule, std::uint64_t seed,
                         data::DataAudit* audit = nullptr);

}  // namespace cttl::harness

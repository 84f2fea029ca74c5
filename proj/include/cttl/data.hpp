// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cttl/model.hpp"
#include "cttl/rng.hpp"
#include "cttl/tensor.hpp"

namespace cttl::data {

using model::ClassId;
using InstanceId = std::uint64_t;

enum class Split { train, stream, holdout };
enum class LabelPurpose { training, evaluation };

// Counts how instances and labels are touched. Gradient records mark
// instances that fed a loss which was backpropagated.
class DataAudit {
public:
    void record_gradient(Split split, std::span<const InstanceId> ids);
    void record_forward(Split split, std::span<const InstanceId> ids);
    void record_label_read(Split split, LabelPurpose purpose, std::size_t count);

    const std::map<InstanceId, std::size_t>& gradient_counts(Split split) const;
    const std::map<InstanceId, std::size_t>& forward_counts(Split split) const;
    std::size_t label_reads(Split split, LabelPurpose purpose) const;

private:
    std::map<Split, std::map<InstanceId, std::size_t>> gradient_;
    std::map<Split, std::map<InstanceId, std::size_t>> forward_;
    std::map<std::pair<Split, LabelPurpose>, std::size_t> labels_;
    static const std::map<InstanceId, std::size_t> kEmpty;
};

// Features with labels. Labels are only reachable through counted accessors.
class LabeledSet {
public:
    LabeledSet() = default;
    LabeledSet(Split split, Tensor features, std::vector<ClassId> labels, std::vector<InstanceId> ids);

    Split split() const { return split_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const Tensor& features() const { return features_; }
    const std::vector<InstanceId>& ids() const { return ids_; }

    std::vector<ClassId> labels(std::span<const std::size_t> rows, LabelPurpose purpose, DataAudit* audit) const;
    std::vector<ClassId> all_labels(LabelPurpose purpose, DataAudit* audit) const;

    LabeledSet subset(std::span<const std::size_t> rows) const;

private:
    Split split_ = Split::train;
    Tensor features_;
    std::vector<ClassId> labels_;
    std::vector<InstanceId> ids_;
};

// Unlabeled test-time data. It can be consumed exactly once.
class UnlabeledStream {
public:
    UnlabeledStream() = default;
    UnlabeledStream(Tensor features, std::vector<InstanceId> ids);

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const Tensor& features() const { return features_; }
    const std::vector<InstanceId>& ids() const { return ids_; }

    bool consumed() const { return consumed_; }
    // Throws std::logic_error on a second pass.
    void begin_pass();

private:
    Tensor features_;
    std::vector<InstanceId> ids_;
    bool consumed_ = false;
};

// Ground truth of a stream, kept apart from it for diagnostics and audits.
class StreamTruth {
public:
    StreamTruth() = default;
    explicit StreamTruth(std::vector<ClassId> labels) : labels_(std::move(labels)) {}
    std::vector<ClassId> labels(DataAudit* audit) const;
    std::size_t size() const { return labels_.size(); }

private:
    std::vector<ClassId> labels_;
};

enum class Imbalance { balanced, dirichlet };
enum class StreamOrder { mixed, task_blocked };

struct SyntheticTaskSpec {
    std::size_t total_classes = 20;
    std::size_t tasks = 5;
    std::size_t classes_per_task = 4;
    std::size_t train_per_class = 64;
    // per seen class and per test-time session
    std::size_t ttl_per_class = 16;
    std::size_t eval_per_class = 32;
    std::size_t input_dim = 64;
    double cluster_separation = 6.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
    Imbalance imbalance = Imbalance::balanced;
    // 0 selects classes_per_task
    double dirichlet_alpha = 0.0;
    StreamOrder stream_order = StreamOrder::mixed;
    // independently generated domains concatenated into one sequence
    std::size_t domains = 1;
    // Share of each mean direction explained by the class embedding vector
    // through a fixed lift; 0 makes class geometry unrelated to the table.
    double alignment = 0.7;
    // must match the encoder's embed_dim when alignment > 0
    std::size_t latent_dim = 32;

    std::size_t session_count() const { return tasks * domains; }
    double effective_alpha() const;
    void validate() const;
};

struct StreamComposition {
    std::vector<ClassId> classes;
    std::vector<double> proportions;
    std::vector<std::size_t> counts;
};

// Per-class proportions drawn once from a symmetric Dirichlet(alpha) and
// scaled to `total` samples; classes may get zero.
StreamComposition sample_imbalanced_ttl(std::span<const ClassId> task_classes, std::size_t total, double alpha,
                                        Rng& rng);

struct Session {
    std::size_t index = 0;
    std::vector<ClassId> classes;
    LabeledSet train;
    UnlabeledStream stream;
    StreamTruth stream_truth;
    // per seen class: instances in this session's stream
    std::map<ClassId, std::size_t> stream_counts;
    LabeledSet holdout;
};

struct SessionSchedule {
    SyntheticTaskSpec spec;
    std::vector<Session> sessions;
    std::size_t epochs = 10;
    // class embedding vectors [total_classes x latent_dim]
    Tensor class_vectors;

    std::size_t size() const { return sessions.size(); }
    // Y_1 u ... u Y_i, ascending.
    std::vector<ClassId> seen_classes(std::size_t upto) const;
};

SessionSchedule generate_tasks(const SyntheticTaskSpec& spec);

// Class vectors for a spec's seed; the same ones generate_tasks stores.
Tensor class_vectors(const SyntheticTaskSpec& spec);

// Labelled data over fresh classes disjoint from every task, drawn with the
// same lift as the tasks. Used to give the encoder a zero-shot starting point.
struct PretextSet {
    LabeledSet data;
    Tensor class_vectors;
};
PretextSet generate_pretext(const SyntheticTaskSpec& spec, std::size_t classes, std::size_t per_class);

struct ReplayItem {
    std::vector<double> features;
    ClassId label = 0;
    InstanceId id = 0;
};

// Fixed-capacity reservoir of labelled samples.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 0, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    std::size_t insertions() const { return seen_; }
    const std::vector<ReplayItem>& items() const { return items_; }

    void insert(ReplayItem item);
    // Up to k distinct buffered items, uniformly without replacement.
    std::vector<std::size_t> sample(std::size_t k);

private:
    std::size_t capacity_;
    std::vector<ReplayItem> items_;
    std::size_t seen_ = 0;
    Rng rng_;
};

}  // namespace cttl::data

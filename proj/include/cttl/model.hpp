// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cttl/graph.hpp"
#include "cttl/params.hpp"

namespace cttl::model {

using ClassId = std::size_t;

// Shape of the toy transformer-style image tower.
//
// An input row of `input_dim` features is cut into `token_count` tokens of
// `token_dim` features. Each block is pre-norm: optional single-head
// attention then an MLP (fc1 -> gelu -> fc2), both residual. Tokens are
// mean-pooled, normalized, projected to `embed_dim` and L2-normalized.
struct EncoderConfig {
    std::size_t input_dim = 64;
    std::size_t token_count = 4;
    std::size_t token_dim = 16;
    std::size_t block_count = 2;
    std::size_t mlp_hidden_dim = 64;
    std::size_t embed_dim = 32;
    bool use_attention = true;
    double init_scale = 1.0;

    void validate() const;
};

std::string fc1_path(std::size_t block);

// Scaled uniform init U(-s/sqrt(fan_in), s/sqrt(fan_in)); biases start at zero.
// Exactly the fc1 weights are flagged as candidates.
ParameterSet init_model(const EncoderConfig& cfg, std::uint64_t seed);

// Recovers the architecture from parameter shapes.
EncoderConfig infer_config(const ParameterSet& params);

// Which parameters a forward pass should track for gradients.
enum class GradScope { none, candidates, all };

// Builds the encoder on `graph`; returns the [B x embed_dim] normalized embedding.
ad::Var encode(ad::Graph& graph, ParameterSet& params, const Tensor& x, GradScope scope);
Tensor encode(const ParameterSet& params, const Tensor& x);

// Frozen per-class unit vectors standing in for the text tower.
class ClassEmbeddingTable {
public:
    ClassEmbeddingTable() = default;
    ClassEmbeddingTable(std::size_t total_classes, std::size_t embed_dim, std::uint64_t seed);
    explicit ClassEmbeddingTable(Tensor vectors);

    const Tensor& vectors() const { return vectors_; }
    std::size_t total_classes() const { return vectors_.rows(); }
    std::size_t embed_dim() const { return vectors_.cols(); }

    const std::set<ClassId>& active_classes() const { return active_; }
    // Adds a task's classes to the active set; throws if any id is already active
    // or out of range.
    void activate(std::span<const ClassId> task_classes);

private:
    Tensor vectors_;
    std::set<ClassId> active_;
};

struct LogitConfig {
    double temperature = 0.07;
    void validate() const;
};

// Sorted, de-duplicated class list; column j of any logit matrix is class_set[j].
std::vector<ClassId> make_class_set(std::span<const ClassId> classes);

// cos(encode(x), class vector) / temperature over `classes` (ascending ids).
ad::Var logits(ad::Graph& graph, ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
               std::span<const ClassId> classes, const LogitConfig& cfg, GradScope scope);
Tensor logits(const ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
              std::span<const ClassId> classes, const LogitConfig& cfg);

// Cross-entropy of cosine logits; `labels` are class ids inside `classes`.
ad::Var model_loss(ad::Graph& graph, ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
                   std::span<const ClassId> labels, std::span<const ClassId> classes, const LogitConfig& cfg,
                   GradScope scope);
double model_loss(const ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
                  std::span<const ClassId> labels, std::span<const ClassId> classes, const LogitConfig& cfg);

// Argmax class id per row of a logit matrix (first maximum wins).
std::vector<ClassId> argmax_classes(const Tensor& logits, std::span<const ClassId> classes);

// Rows [begin, end) of a row-major matrix.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows);

}  // namespace cttl::model

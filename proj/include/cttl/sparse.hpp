// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cttl/model.hpp"
#include "cttl/params.hpp"

namespace cttl::sparse {

// Per-entry relevance |mean gradient| for every candidate parameter.
struct ScoreMap {
    std::map<std::string, Tensor> scores;
    std::size_t task_id = 0;
    std::size_t sample_count = 0;
};

enum class Granularity { per_layer, global };
enum class ReselectScore { max, latest, mean };

// Number of entries a fraction `c` of `n` selects: ceil(c * n), computed so
// that decimal fractions such as 0.1 * 30 do not round up past the exact value.
std::size_t topk_count(double c, std::size_t n);

// Supplies the loss of one batch on `graph`, with candidate parameters tracked.
// Called with consecutive [begin, end) sample ranges.
using BatchLossFn = std::function<ad::Var(ad::Graph& graph, ParameterSet& params, std::size_t begin, std::size_t end)>;

// One pass over `sample_count` samples in batches of `batch_size`; the score of
// entry ij is |(1/N) sum_k g_ij(x_k)|. Parameters are never modified and their
// grad slots are cleared afterwards.
ScoreMap score_parameters(ParameterSet& params, std::size_t sample_count, std::size_t batch_size,
                          const BatchLossFn& batch_loss, std::size_t task_id = 0);

// Convenience overload: cross-entropy of cosine logits over `classes`.
// A nonzero `sample_cap` restricts scoring to the first `sample_cap` samples.
ScoreMap score_parameters(ParameterSet& params, const model::ClassEmbeddingTable& table, const Tensor& x,
                          std::span<const model::ClassId> labels, std::span<const model::ClassId> classes,
                          const model::LogitConfig& logit_cfg, std::size_t batch_size, std::size_t sample_cap = 0,
                          std::size_t task_id = 0);

// Top ceil(c*N) entries by score, ties broken by ascending flat index.
Mask select_topk(const ScoreMap& scores, double c, Granularity granularity = Granularity::per_layer);

struct MaskHistory {
    std::vector<Mask> masks;
    std::vector<ScoreMap> scores;

    void push(Mask mask, ScoreMap score);
    std::size_t size() const { return masks.size(); }
    bool empty() const { return masks.empty(); }
};

// Elementwise OR of every per-task mask.
Mask union_masks(const MaskHistory& history);

// Restricts selection to the union's set bits and keeps the top ceil(c*N) per
// layer using the stored per-task scores combined by `rule`. Layers whose
// pool is smaller than K keep the whole pool and log a warning.
Mask reselect_topk(const Mask& union_mask, const MaskHistory& history, double c,
                   ReselectScore rule = ReselectScore::max, Granularity granularity = Granularity::per_layer);

}  // namespace cttl::sparse

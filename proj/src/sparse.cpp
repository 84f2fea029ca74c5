// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cttl/log.hpp"

namespace cttl::sparse {

namespace {

struct Slot {
    const std::string* path;
    std::size_t index;
    double score;
};

// Orders by descending score, then by position in the candidate list.
void order_slots(std::vector<Slot>& slots) {
    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.score > b.score; });
}

Mask empty_like(const ScoreMap& scores, double c, MaskOrigin origin) {
    Mask m;
    m.sparsity = c;
    m.origin = origin;
    for (const auto& [path, t] : scores.scores) m.bits[path] = std::vector<std::uint8_t>(t.size(), 0);
    return m;
}

void check_fraction(double c) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("sparsity must lie in (0, 1], got " + std::to_string(c));
}

}  // namespace

std::size_t topk_count(double c, std::size_t n) {
    check_fraction(c);
    if (n == 0) return 0;
    const double x = c * static_cast<double>(n);
    const double r = std::round(x);
    std::size_t k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? static_cast<std::size_t>(r)
                                                               : static_cast<std::size_t>(std::ceil(x));
    return std::clamp<std::size_t>(k, 1, n);
}

ScoreMap score_parameters(ParameterSet& params, std::size_t sample_count, std::size_t batch_size,
                          const BatchLossFn& batch_loss, std::size_t task_id) {
    if (sample_count == 0) throw std::invalid_argument("score_parameters: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("score_parameters: batch_size must be positive");
    ScoreMap out;
    out.task_id = task_id;
    out.sample_count = sample_count;
    const auto candidates = params.candidate_paths();
    std::map<std::string, std::vector<double>> sums;
    for (const auto& path : candidates) sums[path].assign(params.at(path).size(), 0.0);

    for (std::size_t begin = 0; begin < sample_count; begin += batch_size) {
        const std::size_t end = std::min(sample_count, begin + batch_size);
        params.clear_grads();
        ad::Graph g;
        ad::Var loss = batch_loss(g, params, begin, end);
        g.backward(loss);
        // batch loss is a mean; weight by batch size to recover the per-sample sum
        const double w = static_cast<double>(end - begin);
        for (const auto& path : candidates) {
            Tensor& t = params.at(path);
            if (!t.has_grad()) continue;
            auto grad = t.grad();
            auto& acc = sums[path];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * grad[i];
        }
    }
    params.clear_grads();

    const double inv_n = 1.0 / static_cast<double>(sample_count);
    for (const auto& path : candidates) {
        Tensor s(params.at(path).shape(), 0.0);
        const auto& acc = sums[path];
        for (std::size_t i = 0; i < acc.size(); ++i) s[i] = std::abs(acc[i] * inv_n);
        out.scores.emplace(path, std::move(s));
    }
    return out;
}

ScoreMap score_parameters(ParameterSet& params, const model::ClassEmbeddingTable& table, const Tensor& x,
                          std::span<const model::ClassId> labels, std::span<const model::ClassId> classes,
                          const model::LogitConfig& logit_cfg, std::size_t batch_size, std::size_t sample_cap,
                          std::size_t task_id) {
    if (x.rows() == 0 || labels.empty()) throw std::invalid_argument("score_parameters: empty dataset");
    if (labels.size() != x.rows()) throw std::invalid_argument("score_parameters: label count does not match rows");
    std::size_t n = x.rows();
    if (sample_cap > 0) n = std::min(n, sample_cap);
    return score_parameters(
        params, n, batch_size,
        [&](ad::Graph& g, ParameterSet& p, std::size_t begin, std::size_t end) {
            return model::model_loss(g, p, table, model::slice_rows(x, begin, end), labels.subspan(begin, end - begin),
                                     classes, logit_cfg, model::GradScope::candidates);
        },
        task_id);
}

Mask select_topk(const ScoreMap& scores, double c, Granularity granularity) {
    check_fraction(c);
    Mask m = empty_like(scores, c, MaskOrigin::per_task);
    if (granularity == Granularity::per_layer) {
        for (const auto& [path, t] : scores.scores) {
            std::vector<Slot> slots;
            slots.reserve(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) slots.push_back({&path, i, t[i]});
            order_slots(slots);
            const std::size_t k = topk_count(c, t.size());
            auto& bits = m.bits[path];
            for (std::size_t i = 0; i < k; ++i) bits[slots[i].index] = 1;
        }
        return m;
    }
    std::vector<Slot> slots;
    for (const auto& [path, t] : scores.scores)
        for (std::size_t i = 0; i < t.size(); ++i) slots.push_back({&path, i, t[i]});
    order_slots(slots);
    const std::size_t k = topk_count(c, slots.size());
    for (std::size_t i = 0; i < k; ++i) m.bits[*slots[i].path][slots[i].index] = 1;
    return m;
}

void MaskHistory::push(Mask mask, ScoreMap score) {
    masks.push_back(std::move(mask));
    scores.push_back(std::move(score));
}

Mask union_masks(const MaskHistory& history) {
    if (history.empty()) throw std::invalid_argument("union_masks: empty mask history");
    Mask u;
    u.origin = MaskOrigin::raw_union;
    u.sparsity = history.masks.front().sparsity;
    for (const Mask& m : history.masks) {
        for (const auto& [path, bits] : m.bits) {
            auto& dst = u.bits[path];
            if (dst.empty()) dst.assign(bits.size(), 0);
            if (dst.size() != bits.size()) throw std::invalid_argument("union_masks: layer size mismatch for " + path);
            for (std::size_t i = 0; i < bits.size(); ++i) dst[i] = (dst[i] | bits[i]) ? 1 : 0;
        }
    }
    return u;
}

Mask reselect_topk(const Mask& union_mask, const MaskHistory& history, double c, ReselectScore rule,
                   Granularity granularity) {
    check_fraction(c);
    if (history.empty()) throw std::invalid_argument("reselect_topk: empty mask history");

    auto combined = [&](const std::string& path, std::size_t i) {
        switch (rule) {
            case ReselectScore::latest: return history.scores.back().scores.at(path)[i];
            case ReselectScore::mean: {
                double s = 0.0;
                for (const auto& sm : history.scores) s += sm.scores.at(path)[i];
                return s / static_cast<double>(history.scores.size());
            }
            case ReselectScore::max:
            default: {
                double s = 0.0;
                for (const auto& sm : history.scores) s = std::max(s, sm.scores.at(path)[i]);
                return s;
            }
        }
    };

    Mask m;
    m.sparsity = c;
    m.origin = MaskOrigin::union_reselected;
    for (const auto& [path, bits] : union_mask.bits) m.bits[path] = std::vector<std::uint8_t>(bits.size(), 0);

    auto pick = [&](std::vector<Slot>& pool, std::size_t k, const std::string& where) {
        if (pool.size() < k) {
            log::warn("reselect_topk: union pool of " + std::to_string(pool.size()) + " in " + where +
                      " is below K=" + std::to_string(k) + "; keeping the whole pool");
            k = pool.size();
        }
        order_slots(pool);
        for (std::size_t i = 0; i < k; ++i) m.bits[*pool[i].path][pool[i].index] = 1;
    };

    if (granularity == Granularity::per_layer) {
        for (const auto& [path, bits] : union_mask.bits) {
            std::vector<Slot> pool;
            for (std::size_t i = 0; i < bits.size(); ++i)
                if (bits[i]) pool.push_back({&path, i, combined(path, i)});
            pick(pool, topk_count(c, bits.size()), path);
        }
        return m;
    }
    std::vector<Slot> pool;
    std::size_t total = 0;
    for (const auto& [path, bits] : union_mask.bits) {
        total += bits.size();
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) pool.push_back({&path, i, combined(path, i)});
    }
    pick(pool, topk_count(c, total), "all layers");
    return m;
}

}  // namespace cttl::sparse

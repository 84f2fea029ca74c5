// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "cttl/graph.hpp"

namespace cttl::ad {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("optimizer: beta1 must lie in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("optimizer: beta2 must lie in (0,1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be > 0");
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::step(ParameterSet& params, const Mask* mask) {
    if (mask == nullptr) {
        for (auto& [path, t] : params.entries()) {
            if (!t.has_grad()) throw std::invalid_argument("optimizer: missing gradient for '" + path + "'");
        }
        for (auto& [path, t] : params.entries()) step_tensor(path, t, {});
        return;
    }
    for (const auto& [path, bits] : mask->bits) {
        if (!params.contains(path) || !params.is_candidate(path)) {
            throw std::invalid_argument("optimizer: mask layer '" + path + "' is not a candidate parameter");
        }
        const Tensor& t = params.at(path);
        if (bits.size() != t.size()) throw std::invalid_argument("optimizer: mask size mismatch for '" + path + "'");
        if (mask->popcount(path) > 0 && !t.has_grad()) {
            throw std::invalid_argument("optimizer: missing gradient for selected parameter '" + path + "'");
        }
    }
    for (const auto& [path, bits] : mask->bits) {
        if (mask->popcount(path) == 0) continue;
        step_tensor(path, params.at(path), bits);
    }
}

void Optimizer::step_tensor(const std::string& path, Tensor& t, std::span<const std::uint8_t> bits) {
    auto values = t.values();
    auto grad = t.grad();
    const bool masked = !bits.empty();
    const double lr = cfg_.learning_rate;

    if (cfg_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (masked && !bits[i]) continue;
            values[i] -= lr * (grad[i] + cfg_.weight_decay * values[i]);
        }
        return;
    }

    Moments& s = state_[path];
    if (s.m.empty()) {
        s.m.assign(values.size(), 0.0);
        s.v.assign(values.size(), 0.0);
    }
    ++s.steps;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.steps));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.steps));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (masked && !bits[i]) continue;
        const double g = grad[i];
        s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
        s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = s.m[i] / bc1;
        const double v_hat = s.v[i] / bc2;
        values[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * values[i]);
    }
}

double cross_entropy_from_logits(const Tensor& logits, std::span<const std::size_t> labels) {
    OpArgs args;
    args.indices.assign(labels.begin(), labels.end());
    const Tensor in[] = {logits};
    return forward_op(OpKind::cross_entropy, in, std::move(args))[0];
}

}  // namespace cttl::ad

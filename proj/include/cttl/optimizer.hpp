// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cttl/params.hpp"

namespace cttl::ad {

enum class OptimizerKind { sgd, adamw };

struct OptimizerConfig {
    double learning_rate = 1e-2;
    OptimizerKind kind = OptimizerKind::adamw;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    double epsilon = 1e-8;

    void validate() const;
};

// Masked first-order optimizer. With a mask, only candidate tensors named in
// the mask are touched and only at positions whose bit is set; moments are
// allocated for those tensors alone. Without a mask every tensor is stepped.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(ParameterSet& params, const Mask* mask = nullptr);

    const OptimizerConfig& config() const { return cfg_; }
    std::size_t state_slots() const { return state_.size(); }
    bool has_state(const std::string& path) const { return state_.count(path) != 0; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
        long steps = 0;
    };

    void step_tensor(const std::string& path, Tensor& t, std::span<const std::uint8_t> bits);

    OptimizerConfig cfg_;
    std::map<std::string, Moments> state_;
};

// Scalar mean cross-entropy of integer labels against [B x C] logits.
double cross_entropy_from_logits(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace cttl::ad

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace cttl {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    for (auto d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension in shape " + shape_str(shape_));
    }
    if (shape_numel(shape_) != values_.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match " +
                                    std::to_string(values_.size()) + " values");
    }
}

Tensor::Tensor(Shape shape, double fill) : Tensor(shape, std::vector<double>(shape_numel(shape), fill)) {}

std::span<double> Tensor::grad() {
    if (!grad_) throw std::logic_error("tensor: gradient slot is empty");
    return *grad_;
}

std::span<const double> Tensor::grad() const {
    if (!grad_) throw std::logic_error("tensor: gradient slot is empty");
    return *grad_;
}

std::span<double> Tensor::ensure_grad() {
    if (!grad_) grad_.emplace(values_.size(), 0.0);
    return *grad_;
}

void Tensor::set_grad(std::vector<double> g) {
    if (g.size() != values_.size()) {
        throw std::invalid_argument("tensor: gradient length " + std::to_string(g.size()) + " does not match " +
                                    std::to_string(values_.size()) + " values");
    }
    grad_ = std::move(g);
}

void Tensor::reshape(Shape shape) {
    if (shape_numel(shape) != values_.size()) {
        throw std::invalid_argument("tensor: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    if (grad_) {
        for (double v : *grad_) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

bool Tensor::same_values(const Tensor& other) const {
    return shape_ == other.shape_ && values_.size() == other.values_.size() &&
           (values_.empty() || std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

}  // namespace cttl

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cttl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 array with an optional gradient slot.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values);
    explicit Tensor(Shape shape, double fill = 0.0);

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor({rows, cols}, std::move(values));
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    // 2-D view: first dimension by the product of the rest.
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& data() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    bool has_grad() const { return grad_.has_value(); }
    std::span<double> grad();
    std::span<const double> grad() const;
    // Allocates a zero gradient if none is present.
    std::span<double> ensure_grad();
    void set_grad(std::vector<double> g);
    void clear_grad() { grad_.reset(); }

    // Reinterprets the shape; element count must match.
    void reshape(Shape shape);

    bool all_finite() const;

    // Value equality (shape and bitwise values); gradients ignored.
    bool same_values(const Tensor& other) const;

private:
    Shape shape_;
    std::vector<double> values_;
    std::optional<std::vector<double>> grad_;
};

}  // namespace cttl

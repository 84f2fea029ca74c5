// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cttl/tensor.hpp"

namespace cttl {

// Named parameter tensors of one model, each flagged as an update candidate or not.
// std::map keeps iteration order deterministic.
class ParameterSet {
public:
    void add(const std::string& path, Tensor value, bool candidate);

    bool contains(const std::string& path) const { return entries_.count(path) != 0; }
    Tensor& at(const std::string& path);
    const Tensor& at(const std::string& path) const;
    bool is_candidate(const std::string& path) const;

    std::vector<std::string> paths() const;
    std::vector<std::string> candidate_paths() const;
    std::size_t size() const { return entries_.size(); }
    std::size_t total_values() const;
    std::size_t candidate_values() const;

    std::map<std::string, Tensor>& entries() { return entries_; }
    const std::map<std::string, Tensor>& entries() const { return entries_; }
    const std::map<std::string, bool>& candidate_flags() const { return candidate_; }

    void clear_grads();

    // Same paths, shapes and candidate flags.
    bool same_structure(const ParameterSet& other) const;
    // Same structure and bit-identical values.
    bool same_values(const ParameterSet& other) const;

private:
    std::map<std::string, Tensor> entries_;
    std::map<std::string, bool> candidate_;
};

enum class MaskOrigin { per_task, raw_union, union_reselected };

// Binary selection over candidate parameters; one byte (0/1) per entry.
struct Mask {
    std::map<std::string, std::vector<std::uint8_t>> bits;
    double sparsity = 1.0;
    MaskOrigin origin = MaskOrigin::per_task;

    std::size_t popcount(const std::string& path) const;
    std::size_t popcount() const;
    bool contains(const std::string& path) const { return bits.count(path) != 0; }

    // All-zero (or all-one) mask over the candidate parameters of `params`.
    static Mask filled(const ParameterSet& params, std::uint8_t value, double sparsity = 1.0,
                       MaskOrigin origin = MaskOrigin::per_task);
};

}  // namespace cttl

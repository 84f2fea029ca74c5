// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/params.hpp"

#include <stdexcept>

namespace cttl {

void ParameterSet::add(const std::string& path, Tensor value, bool candidate) {
    if (path.empty()) throw std::invalid_argument("parameter set: empty path");
    if (!entries_.emplace(path, std::move(value)).second) {
        throw std::invalid_argument("parameter set: duplicate path '" + path + "'");
    }
    candidate_[path] = candidate;
}

Tensor& ParameterSet::at(const std::string& path) {
    auto it = entries_.find(path);
    if (it == entries_.end()) throw std::out_of_range("parameter set: no parameter '" + path + "'");
    return it->second;
}

const Tensor& ParameterSet::at(const std::string& path) const {
    auto it = entries_.find(path);
    if (it == entries_.end()) throw std::out_of_range("parameter set: no parameter '" + path + "'");
    return it->second;
}

bool ParameterSet::is_candidate(const std::string& path) const {
    auto it = candidate_.find(path);
    if (it == candidate_.end()) throw std::out_of_range("parameter set: no parameter '" + path + "'");
    return it->second;
}

std::vector<std::string> ParameterSet::paths() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [p, _] : entries_) out.push_back(p);
    return out;
}

std::vector<std::string> ParameterSet::candidate_paths() const {
    std::vector<std::string> out;
    for (const auto& [p, c] : candidate_) {
        if (c) out.push_back(p);
    }
    return out;
}

std::size_t ParameterSet::total_values() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
}

std::size_t ParameterSet::candidate_values() const {
    std::size_t n = 0;
    for (const auto& [p, t] : entries_) {
        if (candidate_.at(p)) n += t.size();
    }
    return n;
}

void ParameterSet::clear_grads() {
    for (auto& [_, t] : entries_) t.clear_grad();
}

bool ParameterSet::same_structure(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size() || candidate_ != other.candidate_) return false;
    for (const auto& [p, t] : entries_) {
        auto it = other.entries_.find(p);
        if (it == other.entries_.end() || it->second.shape() != t.shape()) return false;
    }
    return true;
}

bool ParameterSet::same_values(const ParameterSet& other) const {
    if (!same_structure(other)) return false;
    for (const auto& [p, t] : entries_) {
        if (!t.same_values(other.entries_.at(p))) return false;
    }
    return true;
}

std::size_t Mask::popcount(const std::string& path) const {
    auto it = bits.find(path);
    if (it == bits.end()) throw std::out_of_range("mask: no layer '" + path + "'");
    std::size_t n = 0;
    for (auto b : it->second) n += b != 0;
    return n;
}

std::size_t Mask::popcount() const {
    std::size_t n = 0;
    for (const auto& [p, _] : bits) n += popcount(p);
    return n;
}

Mask Mask::filled(const ParameterSet& params, std::uint8_t value, double sparsity, MaskOrigin origin) {
    Mask m;
    m.sparsity = sparsity;
    m.origin = origin;
    for (const auto& path : params.candidate_paths()) {
        m.bits[path] = std::vector<std::uint8_t>(params.at(path).size(), value ? 1 : 0);
    }
    return m;
}

}  // namespace cttl

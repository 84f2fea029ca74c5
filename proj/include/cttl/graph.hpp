// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cttl/tensor.hpp"

namespace cttl::ad {

enum class OpKind {
    leaf,
    matmul,
    transpose,
    reshape,
    add,
    scale,
    relu,
    gelu,
    layer_norm,
    softmax,
    log,
    mean,
    cosine_similarity_rows,
    l2_normalize_rows,
    gather_rows,
    concat,
    cross_entropy,
};

std::string_view op_name(OpKind kind);

// Handle to a node in a Graph.
struct Var {
    std::size_t id = 0;
};

// Non-tensor operands for ops that need them.
struct OpArgs {
    double factor = 1.0;                // scale
    std::vector<std::size_t> indices;   // gather_rows rows, cross_entropy labels
    Shape shape;                        // reshape target
};

// Define-by-run tape. Nodes are appended in creation order, which is a valid
// topological order. A graph lives for one forward/backward pass.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Tensor value);
    // Binds an external tensor. When `track` is true, backward() writes the
    // gradient into the tensor's grad slot; otherwise it acts as a constant.
    // Binding the same tensor twice returns the same node.
    Var parameter(Tensor& tensor, bool track = true);

    // Generic entry point: validates shapes, computes the output, and records
    // the node. Throws std::invalid_argument naming the op and shapes.
    Var apply(OpKind kind, std::span<const Var> inputs, OpArgs args = {});

    Var matmul(Var a, Var b) { return apply2(OpKind::matmul, a, b); }
    Var transpose(Var a) { return apply1(OpKind::transpose, a); }
    Var reshape(Var a, Shape shape);
    // Elementwise sum; b may also be a row vector broadcast over a's rows.
    Var add(Var a, Var b) { return apply2(OpKind::add, a, b); }
    Var scale(Var a, double factor);
    Var relu(Var a) { return apply1(OpKind::relu, a); }
    Var gelu(Var a) { return apply1(OpKind::gelu, a); }
    // Row-wise normalization over the last dimension, no affine terms.
    Var layer_norm(Var a) { return apply1(OpKind::layer_norm, a); }
    Var softmax(Var a) { return apply1(OpKind::softmax, a); }
    Var log(Var a) { return apply1(OpKind::log, a); }
    Var mean(Var a) { return apply1(OpKind::mean, a); }
    // [B x d] against [C x d] -> [B x C] pairwise cosines.
    Var cosine_similarity_rows(Var a, Var b) { return apply2(OpKind::cosine_similarity_rows, a, b); }
    Var l2_normalize_rows(Var a) { return apply1(OpKind::l2_normalize_rows, a); }
    Var gather_rows(Var a, std::vector<std::size_t> rows);
    // Row-wise concatenation of 2-D tensors with equal column counts.
    Var concat(std::span<const Var> parts) { return apply(OpKind::concat, parts); }
    // Mean negative log-softmax probability of the labelled class per row.
    Var cross_entropy(Var logits, std::vector<std::size_t> labels);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
    std::span<const std::size_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    std::vector<std::size_t> topological_order() const;

    // Reverse pass from a scalar loss. Every tracked parameter reachable from
    // the loss gets its grad slot overwritten; unreachable ones are untouched.
    void backward(Var loss);

    // Adjoint of an intermediate node after backward(); empty if unreached.
    std::span<const double> adjoint(Var v) const { return nodes_.at(v.id).adjoint; }

private:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::vector<std::size_t> inputs;
        Tensor value;
        OpArgs args;
        std::vector<double> saved;
        std::vector<double> adjoint;
        Tensor* bound = nullptr;
        bool requires_grad = false;
    };

    Var apply1(OpKind kind, Var a) {
        const Var in[] = {a};
        return apply(kind, in);
    }
    Var apply2(OpKind kind, Var a, Var b) {
        const Var in[] = {a, b};
        return apply(kind, in);
    }
    Var push(Node node);
    void backward_node(Node& node);
    std::vector<double>& adjoint_of(std::size_t id);

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> bound_ids_;
};

// Forward-only evaluation of a single op on plain tensors.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, OpArgs args = {});

}  // namespace cttl::ad

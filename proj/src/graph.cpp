// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cttl::ad {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kNormFloor = 1e-12;

[[noreturn]] void shape_error(OpKind kind, std::span<const Tensor* const> in, std::string_view what) {
    std::ostringstream os;
    os << op_name(kind) << ": " << what << " (";
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (i) os << " vs ";
        os << shape_str(in[i]->shape());
    }
    os << ')';
    throw std::invalid_argument(os.str());
}

void require_arity(OpKind kind, std::span<const Tensor* const> in, std::size_t n) {
    if (in.size() != n) {
        throw std::invalid_argument(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                                    std::to_string(in.size()));
    }
}

void require_rank2(OpKind kind, std::span<const Tensor* const> in) {
    for (const Tensor* t : in) {
        if (t->rank() != 2) shape_error(kind, in, "expected rank-2 inputs");
    }
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2) return false;
    const bool row_shaped = (b.rank() == 1) || (b.rank() == 2 && b.dim(0) == 1);
    return row_shaped && b.size() == a.dim(1);
}

// Computes the output of `kind`; `saved` receives whatever backward needs
// beyond the inputs and output.
Tensor compute(OpKind kind, std::span<const Tensor* const> in, const OpArgs& args, std::vector<double>& saved) {
    switch (kind) {
        case OpKind::leaf:
            throw std::invalid_argument("leaf: not an operation");

        case OpKind::matmul: {
            require_arity(kind, in, 2);
            require_rank2(kind, in);
            const Tensor& a = *in[0];
            const Tensor& b = *in[1];
            if (a.dim(1) != b.dim(0)) shape_error(kind, in, "inner dimensions differ");
            const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
            Tensor out({m, n}, 0.0);
            const double* pa = a.data().data();
            const double* pb = b.data().data();
            double* po = out.data().data();
            for (std::size_t i = 0; i < m; ++i) {
                double* row = po + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    if (av == 0.0) continue;
                    const double* brow = pb + p * n;
                    for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
                }
            }
            return out;
        }

        case OpKind::transpose: {
            require_arity(kind, in, 1);
            require_rank2(kind, in);
            const Tensor& a = *in[0];
            const std::size_t m = a.dim(0), n = a.dim(1);
            Tensor out({n, m}, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
            return out;
        }

        case OpKind::reshape: {
            require_arity(kind, in, 1);
            if (shape_numel(args.shape) != in[0]->size()) {
                shape_error(kind, in, "cannot reshape to " + shape_str(args.shape));
            }
            return Tensor(args.shape, in[0]->data());
        }

        case OpKind::add: {
            require_arity(kind, in, 2);
            const Tensor& a = *in[0];
            const Tensor& b = *in[1];
            Tensor out = a;
            if (a.shape() == b.shape()) {
                for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i];
            } else if (is_row_broadcast(a, b)) {
                const std::size_t n = a.dim(1);
                for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i % n];
            } else {
                shape_error(kind, in, "shapes neither equal nor row-broadcastable");
            }
            return out;
        }

        case OpKind::scale: {
            require_arity(kind, in, 1);
            Tensor out = *in[0];
            for (double& v : out.data()) v *= args.factor;
            return out;
        }

        case OpKind::relu: {
            require_arity(kind, in, 1);
            Tensor out = *in[0];
            for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
            return out;
        }

        case OpKind::gelu: {
            require_arity(kind, in, 1);
            Tensor out = *in[0];
            for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            return out;
        }

        case OpKind::layer_norm: {
            require_arity(kind, in, 1);
            const Tensor& a = *in[0];
            const std::size_t n = last_dim(a);
            const std::size_t rows = a.size() / n;
            Tensor out = a;
            saved.assign(rows, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                double* x = out.data().data() + r * n;
                double mu = 0.0;
                for (std::size_t j = 0; j < n; ++j) mu += x[j];
                mu /= static_cast<double>(n);
                double var = 0.0;
                for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
                var /= static_cast<double>(n);
                const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
                for (std::size_t j = 0; j < n; ++j) x[j] = (x[j] - mu) * inv_std;
                saved[r] = inv_std;
            }
            return out;
        }

        case OpKind::softmax: {
            require_arity(kind, in, 1);
            const Tensor& a = *in[0];
            const std::size_t n = last_dim(a);
            const std::size_t rows = a.size() / n;
            Tensor out = a;
            for (std::size_t r = 0; r < rows; ++r) {
                double* x = out.data().data() + r * n;
                const double mx = *std::max_element(x, x + n);
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    x[j] = std::exp(x[j] - mx);
                    sum += x[j];
                }
                for (std::size_t j = 0; j < n; ++j) x[j] /= sum;
            }
            return out;
        }

        case OpKind::log: {
            require_arity(kind, in, 1);
            Tensor out = *in[0];
            for (double& v : out.data()) {
                if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
                v = std::log(v);
            }
            return out;
        }

        case OpKind::mean: {
            require_arity(kind, in, 1);
            double sum = 0.0;
            for (double v : in[0]->data()) sum += v;
            return Tensor::scalar(sum / static_cast<double>(in[0]->size()));
        }

        case OpKind::cosine_similarity_rows: {
            require_arity(kind, in, 2);
            require_rank2(kind, in);
            const Tensor& a = *in[0];
            const Tensor& b = *in[1];
            if (a.dim(1) != b.dim(1)) shape_error(kind, in, "row lengths differ");
            const std::size_t m = a.dim(0), c = b.dim(0), d = a.dim(1);
            // saved: m norms of a, then c norms of b
            saved.assign(m + c, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * a[i * d + k];
                saved[i] = std::max(std::sqrt(s), kNormFloor);
            }
            for (std::size_t j = 0; j < c; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += b[j * d + k] * b[j * d + k];
                saved[m + j] = std::max(std::sqrt(s), kNormFloor);
            }
            Tensor out({m, c}, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    double dot = 0.0;
                    for (std::size_t k = 0; k < d; ++k) dot += a[i * d + k] * b[j * d + k];
                    out[i * c + j] = dot / (saved[i] * saved[m + j]);
                }
            }
            return out;
        }

        case OpKind::l2_normalize_rows: {
            require_arity(kind, in, 1);
            require_rank2(kind, in);
            const Tensor& a = *in[0];
            const std::size_t m = a.dim(0), d = a.dim(1);
            Tensor out = a;
            saved.assign(m, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * a[i * d + k];
                const double norm = std::max(std::sqrt(s), kNormFloor);
                saved[i] = norm;
                for (std::size_t k = 0; k < d; ++k) out[i * d + k] /= norm;
            }
            return out;
        }

        case OpKind::gather_rows: {
            require_arity(kind, in, 1);
            const Tensor& a = *in[0];
            if (args.indices.empty()) shape_error(kind, in, "empty row selection");
            const std::size_t n = a.cols();
            Shape shape = a.shape();
            shape[0] = args.indices.size();
            std::vector<double> vals;
            vals.reserve(args.indices.size() * n);
            for (std::size_t r : args.indices) {
                if (r >= a.rows()) shape_error(kind, in, "row index " + std::to_string(r) + " out of range");
                vals.insert(vals.end(), a.data().begin() + static_cast<std::ptrdiff_t>(r * n),
                            a.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
            }
            return Tensor(std::move(shape), std::move(vals));
        }

        case OpKind::concat: {
            if (in.empty()) throw std::invalid_argument("concat: no inputs");
            Shape shape = in[0]->shape();
            std::size_t total_rows = 0;
            for (const Tensor* t : in) {
                if (t->rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), t->shape().begin() + 1)) {
                    shape_error(kind, in, "trailing dimensions differ");
                }
                total_rows += t->rows();
            }
            shape[0] = total_rows;
            std::vector<double> vals;
            vals.reserve(shape_numel(shape));
            for (const Tensor* t : in) vals.insert(vals.end(), t->data().begin(), t->data().end());
            return Tensor(std::move(shape), std::move(vals));
        }

        case OpKind::cross_entropy: {
            require_arity(kind, in, 1);
            require_rank2(kind, in);
            const Tensor& z = *in[0];
            const std::size_t b = z.dim(0), c = z.dim(1);
            if (args.indices.size() != b) {
                shape_error(kind, in, "expected " + std::to_string(b) + " labels, got " + std::to_string(args.indices.size()));
            }
            // saved: softmax probabilities
            saved.assign(z.size(), 0.0);
            double total = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t y = args.indices[i];
                if (y >= c) {
                    throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                                                std::to_string(c) + ")");
                }
                const double* row = z.data().data() + i * c;
                const double mx = *std::max_element(row, row + c);
                double sum = 0.0;
                for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
                const double lse = mx + std::log(sum);
                for (std::size_t j = 0; j < c; ++j) saved[i * c + j] = std::exp(row[j] - lse);
                total += lse - row[y];
            }
            return Tensor::scalar(total / static_cast<double>(b));
        }
    }
    throw std::invalid_argument("unknown op kind");
}

}  // namespace

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::reshape: return "reshape";
        case OpKind::add: return "add";
        case OpKind::scale: return "scale";
        case OpKind::relu: return "relu";
        case OpKind::gelu: return "gelu";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::softmax: return "softmax";
        case OpKind::log: return "log";
        case OpKind::mean: return "mean";
        case OpKind::cosine_similarity_rows: return "cosine_similarity_rows";
        case OpKind::l2_normalize_rows: return "l2_normalize_rows";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::concat: return "concat";
        case OpKind::cross_entropy: return "cross_entropy";
    }
    return "unknown";
}

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, OpArgs args) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(inputs.size());
    for (const Tensor& t : inputs) ptrs.push_back(&t);
    std::vector<double> saved;
    return compute(kind, ptrs, args, saved);
}

Var Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
    Node node;
    node.value = std::move(value);
    return push(std::move(node));
}

Var Graph::parameter(Tensor& tensor, bool track) {
    if (auto it = bound_ids_.find(&tensor); it != bound_ids_.end()) {
        nodes_[it->second].requires_grad = nodes_[it->second].requires_grad || track;
        return Var{it->second};
    }
    Node node;
    node.value = tensor;
    node.value.clear_grad();
    node.bound = &tensor;
    node.requires_grad = track;
    Var v = push(std::move(node));
    bound_ids_.emplace(&tensor, v.id);
    return v;
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs, OpArgs args) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(inputs.size());
    Node node;
    node.kind = kind;
    for (Var v : inputs) {
        if (v.id >= nodes_.size()) throw std::out_of_range(std::string(op_name(kind)) + ": unknown input node");
        ptrs.push_back(&nodes_[v.id].value);
        node.inputs.push_back(v.id);
        node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }
    node.value = compute(kind, ptrs, args, node.saved);
    node.args = std::move(args);
    return push(std::move(node));
}

Var Graph::reshape(Var a, Shape shape) {
    OpArgs args;
    args.shape = std::move(shape);
    const Var in[] = {a};
    return apply(OpKind::reshape, in, std::move(args));
}

Var Graph::scale(Var a, double factor) {
    OpArgs args;
    args.factor = factor;
    const Var in[] = {a};
    return apply(OpKind::scale, in, std::move(args));
}

Var Graph::gather_rows(Var a, std::vector<std::size_t> rows) {
    OpArgs args;
    args.indices = std::move(rows);
    const Var in[] = {a};
    return apply(OpKind::gather_rows, in, std::move(args));
}

Var Graph::cross_entropy(Var logits, std::vector<std::size_t> labels) {
    OpArgs args;
    args.indices = std::move(labels);
    const Var in[] = {logits};
    return apply(OpKind::cross_entropy, in, std::move(args));
}

std::vector<std::size_t> Graph::topological_order() const {
    std::vector<std::size_t> order(nodes_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return order;
}

std::vector<double>& Graph::adjoint_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.adjoint.empty()) n.adjoint.assign(n.value.size(), 0.0);
    return n.adjoint;
}

void Graph::backward(Var loss) {
    if (loss.id >= nodes_.size()) throw std::out_of_range("backward: unknown loss node");
    if (nodes_[loss.id].value.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(nodes_[loss.id].value.shape()));
    }
    for (Node& n : nodes_) n.adjoint.clear();
    adjoint_of(loss.id)[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.adjoint.empty() || !n.requires_grad) continue;
        if (n.kind == OpKind::leaf) {
            if (n.bound != nullptr) n.bound->set_grad(n.adjoint);
            continue;
        }
        backward_node(n);
    }
}

void Graph::backward_node(Node& node) {
    const std::vector<double>& dy = node.adjoint;
    auto wants = [&](std::size_t slot) { return nodes_[node.inputs[slot]].requires_grad; };
    auto input = [&](std::size_t slot) -> const Tensor& { return nodes_[node.inputs[slot]].value; };

    switch (node.kind) {
        case OpKind::leaf:
            return;

        case OpKind::matmul: {
            const Tensor& a = input(0);
            const Tensor& b = input(1);
            const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
            if (wants(0)) {
                auto& da = adjoint_of(node.inputs[0]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += dy[i * n + j] * b[p * n + j];
                        da[i * k + p] += s;
                    }
            }
            if (wants(1)) {
                auto& db = adjoint_of(node.inputs[1]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = a[i * k + p];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) db[p * n + j] += av * dy[i * n + j];
                    }
            }
            return;
        }

        case OpKind::transpose: {
            if (!wants(0)) return;
            const Tensor& a = input(0);
            const std::size_t m = a.dim(0), n = a.dim(1);
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dy[j * m + i];
            return;
        }

        case OpKind::reshape:
        case OpKind::scale: {
            if (!wants(0)) return;
            const double f = node.kind == OpKind::scale ? node.args.factor : 1.0;
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += f * dy[i];
            return;
        }

        case OpKind::add: {
            if (wants(0)) {
                auto& da = adjoint_of(node.inputs[0]);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
            }
            if (wants(1)) {
                auto& db = adjoint_of(node.inputs[1]);
                const std::size_t n = db.size();
                for (std::size_t i = 0; i < dy.size(); ++i) db[i % n] += dy[i];
            }
            return;
        }

        case OpKind::relu: {
            if (!wants(0)) return;
            const Tensor& a = input(0);
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += a[i] > 0.0 ? dy[i] : 0.0;
            return;
        }

        case OpKind::gelu: {
            if (!wants(0)) return;
            const Tensor& a = input(0);
            auto& da = adjoint_of(node.inputs[0]);
            const double inv_sqrt_2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const double x = a[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                da[i] += dy[i] * (cdf + x * pdf);
            }
            return;
        }

        case OpKind::layer_norm: {
            if (!wants(0)) return;
            const Tensor& y = node.value;
            const std::size_t n = last_dim(y);
            const std::size_t rows = y.size() / n;
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = y.data().data() + r * n;
                const double* g = dy.data() + r * n;
                double mean_g = 0.0, mean_gy = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    mean_g += g[j];
                    mean_gy += g[j] * yr[j];
                }
                mean_g /= static_cast<double>(n);
                mean_gy /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) da[r * n + j] += node.saved[r] * (g[j] - mean_g - yr[j] * mean_gy);
            }
            return;
        }

        case OpKind::softmax: {
            if (!wants(0)) return;
            const Tensor& y = node.value;
            const std::size_t n = last_dim(y);
            const std::size_t rows = y.size() / n;
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += dy[r * n + j] * y[r * n + j];
                for (std::size_t j = 0; j < n; ++j) da[r * n + j] += y[r * n + j] * (dy[r * n + j] - dot);
            }
            return;
        }

        case OpKind::log: {
            if (!wants(0)) return;
            const Tensor& a = input(0);
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] / a[i];
            return;
        }

        case OpKind::mean: {
            if (!wants(0)) return;
            auto& da = adjoint_of(node.inputs[0]);
            const double g = dy[0] / static_cast<double>(da.size());
            for (double& v : da) v += g;
            return;
        }

        case OpKind::cosine_similarity_rows: {
            const Tensor& a = input(0);
            const Tensor& b = input(1);
            const Tensor& cosv = node.value;
            const std::size_t m = a.dim(0), c = b.dim(0), d = a.dim(1);
            const double* na = node.saved.data();
            const double* nb = node.saved.data() + m;
            // d cos / du = v / (|u||v|) - cos * u / |u|^2
            if (wants(0)) {
                auto& da = adjoint_of(node.inputs[0]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        const double g = dy[i * c + j];
                        if (g == 0.0) continue;
                        const double s1 = g / (na[i] * nb[j]);
                        const double s2 = g * cosv[i * c + j] / (na[i] * na[i]);
                        for (std::size_t k = 0; k < d; ++k) da[i * d + k] += s1 * b[j * d + k] - s2 * a[i * d + k];
                    }
            }
            if (wants(1)) {
                auto& db = adjoint_of(node.inputs[1]);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        const double g = dy[i * c + j];
                        if (g == 0.0) continue;
                        const double s1 = g / (na[i] * nb[j]);
                        const double s2 = g * cosv[i * c + j] / (nb[j] * nb[j]);
                        for (std::size_t k = 0; k < d; ++k) db[j * d + k] += s1 * a[i * d + k] - s2 * b[j * d + k];
                    }
            }
            return;
        }

        case OpKind::l2_normalize_rows: {
            if (!wants(0)) return;
            const Tensor& y = node.value;
            const std::size_t m = y.dim(0), d = y.dim(1);
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += y[i * d + k] * dy[i * d + k];
                for (std::size_t k = 0; k < d; ++k)
                    da[i * d + k] += (dy[i * d + k] - y[i * d + k] * dot) / node.saved[i];
            }
            return;
        }

        case OpKind::gather_rows: {
            if (!wants(0)) return;
            const std::size_t n = input(0).cols();
            auto& da = adjoint_of(node.inputs[0]);
            for (std::size_t r = 0; r < node.args.indices.size(); ++r) {
                const std::size_t src = node.args.indices[r];
                for (std::size_t j = 0; j < n; ++j) da[src * n + j] += dy[r * n + j];
            }
            return;
        }

        case OpKind::concat: {
            std::size_t offset = 0;
            for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
                const std::size_t len = input(slot).size();
                if (wants(slot)) {
                    auto& da = adjoint_of(node.inputs[slot]);
                    for (std::size_t i = 0; i < len; ++i) da[i] += dy[offset + i];
                }
                offset += len;
            }
            return;
        }

        case OpKind::cross_entropy: {
            if (!wants(0)) return;
            const Tensor& z = input(0);
            const std::size_t b = z.dim(0), c = z.dim(1);
            auto& da = adjoint_of(node.inputs[0]);
            const double g = dy[0] / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double onehot = j == node.args.indices[i] ? 1.0 : 0.0;
                    da[i * c + j] += g * (node.saved[i * c + j] - onehot);
                }
            }
            return;
        }
    }
}

}  // namespace cttl::ad

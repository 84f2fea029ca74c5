// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cttl/rng.hpp"

namespace cttl::model {

namespace {

constexpr double kMaskedScore = -1e30;

std::string block_path(std::size_t block, const char* leaf) { return "block" + std::to_string(block) + "." + leaf; }

Tensor uniform_tensor(Shape shape, std::size_t fan_in, double scale, Rng& rng) {
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

// Binds parameters either as tracked leaves (mutable set) or as constants.
class Binder {
public:
    Binder(ad::Graph& g, const ParameterSet& cparams, ParameterSet* mparams, GradScope scope)
        : g_(g), cparams_(cparams), mparams_(mparams), scope_(scope) {}

    ad::Var operator()(const std::string& path) const {
        if (mparams_ == nullptr) return g_.constant(cparams_.at(path));
        const bool track =
            scope_ == GradScope::all || (scope_ == GradScope::candidates && mparams_->is_candidate(path));
        return g_.parameter(mparams_->at(path), track);
    }

private:
    ad::Graph& g_;
    const ParameterSet& cparams_;
    ParameterSet* mparams_;
    GradScope scope_;
};

ad::Var linear(ad::Graph& g, ad::Var h, ad::Var weight) { return g.matmul(h, g.transpose(weight)); }

ad::Var encode_impl(ad::Graph& g, const ParameterSet& params, ParameterSet* mutable_params, const Tensor& x,
                    GradScope scope) {
    const EncoderConfig cfg = infer_config(params);
    const std::size_t t = cfg.token_count, d = cfg.token_dim;
    if (x.rank() != 2 || x.cols() != cfg.input_dim) {
        throw std::invalid_argument("encode: expected input [B x " + std::to_string(cfg.input_dim) + "], got " +
                                    shape_str(x.shape()));
    }
    const std::size_t b = x.rows();
    const std::size_t bt = b * t;
    Binder bind(g, params, mutable_params, scope);

    Tensor tokens = x;
    tokens.reshape({bt, d});
    ad::Var h = g.add(linear(g, g.constant(std::move(tokens)), bind("patch.weight")), bind("patch.bias"));
    std::vector<std::size_t> pos_rows(bt);
    for (std::size_t i = 0; i < bt; ++i) pos_rows[i] = i % t;
    h = g.add(h, g.gather_rows(bind("pos"), std::move(pos_rows)));

    ad::Var attn_mask{};
    const bool need_mask = cfg.use_attention && b > 1;
    if (need_mask) {
        Tensor m({bt, bt}, kMaskedScore);
        for (std::size_t i = 0; i < bt; ++i) {
            const std::size_t s = (i / t) * t;
            for (std::size_t j = s; j < s + t; ++j) m[i * bt + j] = 0.0;
        }
        attn_mask = g.constant(std::move(m));
    }
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(d));

    for (std::size_t blk = 0; blk < cfg.block_count; ++blk) {
        if (cfg.use_attention) {
            ad::Var a = g.layer_norm(h);
            ad::Var q = linear(g, a, bind(block_path(blk, "attn.q.weight")));
            ad::Var k = linear(g, a, bind(block_path(blk, "attn.k.weight")));
            ad::Var v = linear(g, a, bind(block_path(blk, "attn.v.weight")));
            ad::Var s = g.scale(g.matmul(q, g.transpose(k)), attn_scale);
            if (need_mask) s = g.add(s, attn_mask);
            ad::Var o = linear(g, g.matmul(g.softmax(s), v), bind(block_path(blk, "attn.o.weight")));
            h = g.add(h, o);
        }
        ad::Var m = g.layer_norm(h);
        ad::Var u = g.gelu(g.add(linear(g, m, bind(fc1_path(blk))), bind(block_path(blk, "mlp.fc1.bias"))));
        ad::Var w = g.add(linear(g, u, bind(block_path(blk, "mlp.fc2.weight"))), bind(block_path(blk, "mlp.fc2.bias")));
        h = g.add(h, w);
    }

    Tensor pool({t * d, d}, 0.0);
    for (std::size_t i = 0; i < t * d; ++i) pool[i * d + i % d] = 1.0 / static_cast<double>(t);
    ad::Var pooled = g.matmul(g.reshape(h, {b, t * d}), g.constant(std::move(pool)));
    ad::Var z = linear(g, g.layer_norm(pooled), bind("head.proj.weight"));
    return g.l2_normalize_rows(z);
}

std::vector<std::size_t> label_columns(std::span<const ClassId> labels, std::span<const ClassId> classes) {
    std::vector<std::size_t> cols;
    cols.reserve(labels.size());
    for (ClassId y : labels) {
        auto it = std::lower_bound(classes.begin(), classes.end(), y);
        if (it == classes.end() || *it != y) {
            throw std::invalid_argument("model_loss: label " + std::to_string(y) + " not in class set");
        }
        cols.push_back(static_cast<std::size_t>(it - classes.begin()));
    }
    return cols;
}

void check_class_set(std::span<const ClassId> classes, const ClassEmbeddingTable& table) {
    if (classes.empty()) throw std::invalid_argument("logits: empty class set");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] >= table.total_classes()) {
            throw std::invalid_argument("logits: class " + std::to_string(classes[i]) + " outside table of " +
                                        std::to_string(table.total_classes()));
        }
        if (i > 0 && classes[i] <= classes[i - 1]) {
            throw std::invalid_argument("logits: class set must be strictly ascending");
        }
    }
}

ad::Var logits_impl(ad::Graph& g, const ParameterSet& params, ParameterSet* mparams, const ClassEmbeddingTable& table,
                    const Tensor& x, std::span<const ClassId> classes, const LogitConfig& cfg, GradScope scope) {
    cfg.validate();
    check_class_set(classes, table);
    ad::Var e = encode_impl(g, params, mparams, x, scope);
    ad::Var cls = g.gather_rows(g.constant(table.vectors()), std::vector<std::size_t>(classes.begin(), classes.end()));
    return g.scale(g.cosine_similarity_rows(e, cls), 1.0 / cfg.temperature);
}

}  // namespace

void EncoderConfig::validate() const {
    if (input_dim == 0 || token_count == 0 || token_dim == 0 || mlp_hidden_dim == 0 || embed_dim == 0) {
        throw std::invalid_argument("encoder: all dimensions must be positive");
    }
    if (token_count * token_dim != input_dim) {
        throw std::invalid_argument("encoder: token_count x token_dim (" + std::to_string(token_count) + " x " +
                                    std::to_string(token_dim) + ") must equal input_dim " + std::to_string(input_dim));
    }
    if (block_count < 1) throw std::invalid_argument("encoder: block_count must be >= 1");
    if (!(init_scale > 0.0)) throw std::invalid_argument("encoder: init_scale must be > 0");
}

std::string fc1_path(std::size_t block) { return block_path(block, "mlp.fc1.weight"); }

ParameterSet init_model(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::size_t d = cfg.token_dim, h = cfg.mlp_hidden_dim;
    const double s = cfg.init_scale;
    ParameterSet p;
    p.add("patch.weight", uniform_tensor({d, d}, d, s, rng), false);
    p.add("patch.bias", Tensor({d}, 0.0), false);
    p.add("pos", uniform_tensor({cfg.token_count, d}, d, s, rng), false);
    for (std::size_t b = 0; b < cfg.block_count; ++b) {
        if (cfg.use_attention) {
            for (const char* name : {"attn.q.weight", "attn.k.weight", "attn.v.weight", "attn.o.weight"}) {
                p.add(block_path(b, name), uniform_tensor({d, d}, d, s, rng), false);
            }
        }
        p.add(fc1_path(b), uniform_tensor({h, d}, d, s, rng), true);
        p.add(block_path(b, "mlp.fc1.bias"), Tensor({h}, 0.0), false);
        p.add(block_path(b, "mlp.fc2.weight"), uniform_tensor({d, h}, h, s, rng), false);
        p.add(block_path(b, "mlp.fc2.bias"), Tensor({d}, 0.0), false);
    }
    p.add("head.proj.weight", uniform_tensor({cfg.embed_dim, d}, d, s, rng), false);
    return p;
}

EncoderConfig infer_config(const ParameterSet& params) {
    EncoderConfig cfg;
    const Tensor& patch = params.at("patch.weight");
    cfg.token_dim = patch.dim(0);
    cfg.token_count = params.at("pos").dim(0);
    cfg.input_dim = cfg.token_count * cfg.token_dim;
    std::size_t blocks = 0;
    while (params.contains(fc1_path(blocks))) ++blocks;
    if (blocks == 0) throw std::invalid_argument("encoder: parameter set has no blocks");
    cfg.block_count = blocks;
    cfg.mlp_hidden_dim = params.at(fc1_path(0)).dim(0);
    cfg.embed_dim = params.at("head.proj.weight").dim(0);
    cfg.use_attention = params.contains(block_path(0, "attn.q.weight"));
    return cfg;
}

ad::Var encode(ad::Graph& graph, ParameterSet& params, const Tensor& x, GradScope scope) {
    return encode_impl(graph, params, &params, x, scope);
}

Tensor encode(const ParameterSet& params, const Tensor& x) {
    ad::Graph g;
    return g.value(encode_impl(g, params, nullptr, x, GradScope::none));
}

ClassEmbeddingTable::ClassEmbeddingTable(std::size_t total_classes, std::size_t embed_dim, std::uint64_t seed) {
    if (total_classes == 0 || embed_dim == 0) throw std::invalid_argument("class table: empty dimensions");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor v({total_classes, embed_dim}, 0.0);
    for (std::size_t c = 0; c < total_classes; ++c) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (std::size_t k = 0; k < embed_dim; ++k) {
                v.at(c, k) = normal(rng);
                norm += v.at(c, k) * v.at(c, k);
            }
        } while (norm < 1e-12);
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < embed_dim; ++k) v.at(c, k) /= norm;
    }
    vectors_ = std::move(v);
}

ClassEmbeddingTable::ClassEmbeddingTable(Tensor vectors) : vectors_(std::move(vectors)) {
    if (vectors_.rank() != 2) throw std::invalid_argument("class table: expected a matrix");
    for (std::size_t c = 0; c < vectors_.rows(); ++c) {
        double norm = 0.0;
        for (std::size_t k = 0; k < vectors_.cols(); ++k) norm += vectors_.at(c, k) * vectors_.at(c, k);
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) {
            throw std::invalid_argument("class table: row " + std::to_string(c) + " is not unit norm");
        }
    }
}

void ClassEmbeddingTable::activate(std::span<const ClassId> task_classes) {
    for (ClassId c : task_classes) {
        if (c >= total_classes()) throw std::invalid_argument("class table: class " + std::to_string(c) + " out of range");
        if (active_.count(c)) {
            throw std::invalid_argument("class table: class " + std::to_string(c) + " already belongs to an earlier task");
        }
    }
    active_.insert(task_classes.begin(), task_classes.end());
}

void LogitConfig::validate() const {
    if (!(temperature > 0.0)) throw std::invalid_argument("logits: temperature must be > 0");
}

std::vector<ClassId> make_class_set(std::span<const ClassId> classes) {
    std::vector<ClassId> out(classes.begin(), classes.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ad::Var logits(ad::Graph& graph, ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
               std::span<const ClassId> classes, const LogitConfig& cfg, GradScope scope) {
    return logits_impl(graph, params, &params, table, x, classes, cfg, scope);
}

Tensor logits(const ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
              std::span<const ClassId> classes, const LogitConfig& cfg) {
    ad::Graph g;
    return g.value(logits_impl(g, params, nullptr, table, x, classes, cfg, GradScope::none));
}

ad::Var model_loss(ad::Graph& graph, ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
                   std::span<const ClassId> labels, std::span<const ClassId> classes, const LogitConfig& cfg,
                   GradScope scope) {
    auto cols = label_columns(labels, classes);
    ad::Var z = logits_impl(graph, params, &params, table, x, classes, cfg, scope);
    return graph.cross_entropy(z, std::move(cols));
}

double model_loss(const ParameterSet& params, const ClassEmbeddingTable& table, const Tensor& x,
                  std::span<const ClassId> labels, std::span<const ClassId> classes, const LogitConfig& cfg) {
    auto cols = label_columns(labels, classes);
    ad::Graph g;
    ad::Var z = logits_impl(g, params, nullptr, table, x, classes, cfg, GradScope::none);
    return g.value(g.cross_entropy(z, std::move(cols)))[0];
}

std::vector<ClassId> argmax_classes(const Tensor& logits, std::span<const ClassId> classes) {
    if (logits.rank() != 2 || logits.cols() != classes.size()) {
        throw std::invalid_argument("argmax: logits " + shape_str(logits.shape()) + " do not match " +
                                    std::to_string(classes.size()) + " classes");
    }
    std::vector<ClassId> out(logits.rows());
    const std::size_t c = logits.cols();
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* row = logits.data().data() + i * c;
        out[i] = classes[static_cast<std::size_t>(std::max_element(row, row + c) - row)];
    }
    return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (begin >= end || end > x.rows()) throw std::out_of_range("slice_rows: bad range");
    const std::size_t n = x.cols();
    Shape shape = x.shape();
    shape[0] = end - begin;
    return Tensor(std::move(shape), std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                                                        x.data().begin() + static_cast<std::ptrdiff_t>(end * n)));
}

Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::out_of_range("take_rows: empty selection");
    const std::size_t n = x.cols();
    Shape shape = x.shape();
    shape[0] = rows.size();
    std::vector<double> vals;
    vals.reserve(rows.size() * n);
    for (std::size_t r : rows) {
        if (r >= x.rows()) throw std::out_of_range("take_rows: row out of range");
        vals.insert(vals.end(), x.data().begin() + static_cast<std::ptrdiff_t>(r * n),
                    x.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    }
    return Tensor(std::move(shape), std::move(vals));
}

}  // namespace cttl::model

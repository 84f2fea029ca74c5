// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cttl::data {

const std::map<InstanceId, std::size_t> DataAudit::kEmpty{};

void DataAudit::record_gradient(Split split, std::span<const InstanceId> ids) {
    auto& m = gradient_[split];
    for (InstanceId id : ids) ++m[id];
}

void DataAudit::record_forward(Split split, std::span<const InstanceId> ids) {
    auto& m = forward_[split];
    for (InstanceId id : ids) ++m[id];
}

void DataAudit::record_label_read(Split split, LabelPurpose purpose, std::size_t count) {
    labels_[{split, purpose}] += count;
}

const std::map<InstanceId, std::size_t>& DataAudit::gradient_counts(Split split) const {
    auto it = gradient_.find(split);
    return it == gradient_.end() ? kEmpty : it->second;
}

const std::map<InstanceId, std::size_t>& DataAudit::forward_counts(Split split) const {
    auto it = forward_.find(split);
    return it == forward_.end() ? kEmpty : it->second;
}

std::size_t DataAudit::label_reads(Split split, LabelPurpose purpose) const {
    auto it = labels_.find({split, purpose});
    return it == labels_.end() ? 0 : it->second;
}

LabeledSet::LabeledSet(Split split, Tensor features, std::vector<ClassId> labels, std::vector<InstanceId> ids)
    : split_(split), features_(std::move(features)), labels_(std::move(labels)), ids_(std::move(ids)) {
    if (labels_.size() != ids_.size() || features_.rows() != ids_.size()) {
        throw std::invalid_argument("labeled set: features, labels and ids disagree in length");
    }
}

std::vector<ClassId> LabeledSet::labels(std::span<const std::size_t> rows, LabelPurpose purpose,
                                        DataAudit* audit) const {
    std::vector<ClassId> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(labels_.at(r));
    if (audit) audit->record_label_read(split_, purpose, rows.size());
    return out;
}

std::vector<ClassId> LabeledSet::all_labels(LabelPurpose purpose, DataAudit* audit) const {
    if (audit) audit->record_label_read(split_, purpose, labels_.size());
    return labels_;
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
    std::vector<ClassId> labels;
    std::vector<InstanceId> ids;
    for (std::size_t r : rows) {
        labels.push_back(labels_.at(r));
        ids.push_back(ids_.at(r));
    }
    return LabeledSet(split_, model::take_rows(features_, rows), std::move(labels), std::move(ids));
}

UnlabeledStream::UnlabeledStream(Tensor features, std::vector<InstanceId> ids)
    : features_(std::move(features)), ids_(std::move(ids)) {
    if (features_.rows() != ids_.size()) throw std::invalid_argument("stream: features and ids disagree in length");
}

void UnlabeledStream::begin_pass() {
    if (consumed_) throw std::logic_error("stream: test-time data may be processed only once");
    consumed_ = true;
}

std::vector<ClassId> StreamTruth::labels(DataAudit* audit) const {
    if (audit) audit->record_label_read(Split::stream, LabelPurpose::evaluation, labels_.size());
    return labels_;
}

double SyntheticTaskSpec::effective_alpha() const {
    return dirichlet_alpha > 0.0 ? dirichlet_alpha : static_cast<double>(classes_per_task);
}

void SyntheticTaskSpec::validate() const {
    if (tasks == 0 || classes_per_task == 0 || domains == 0) {
        throw std::invalid_argument("tasks: tasks, classes_per_task and domains must be positive");
    }
    if (tasks * classes_per_task * domains > total_classes) {
        throw std::invalid_argument("tasks: " + std::to_string(domains) + " x " + std::to_string(tasks) + " tasks x " +
                                    std::to_string(classes_per_task) + " classes exceed total_classes " +
                                    std::to_string(total_classes));
    }
    if (train_per_class == 0 || ttl_per_class == 0 || eval_per_class == 0) {
        throw std::invalid_argument("tasks: samples_per_class too small to fill train/ttl/eval splits");
    }
    if (input_dim == 0) throw std::invalid_argument("tasks: input_dim must be positive");
    if (!(cluster_separation > 0.0)) throw std::invalid_argument("tasks: cluster_separation must be > 0");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("tasks: noise_sigma must be >= 0");
    if (dirichlet_alpha < 0.0) throw std::invalid_argument("tasks: dirichlet_alpha must be >= 0");
    if (!(alignment >= 0.0 && alignment <= 1.0)) throw std::invalid_argument("tasks: alignment must lie in [0,1]");
    if (latent_dim == 0) throw std::invalid_argument("tasks: latent_dim must be positive");
}

StreamComposition sample_imbalanced_ttl(std::span<const ClassId> task_classes, std::size_t total, double alpha,
                                        Rng& rng) {
    if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet: alpha must be > 0");
    if (task_classes.empty()) throw std::invalid_argument("dirichlet: empty class list");
    StreamComposition out;
    out.classes.assign(task_classes.begin(), task_classes.end());
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> g(task_classes.size(), 0.0);
    double sum = 0.0;
    for (int attempt = 0; attempt < 64 && !(sum > 0.0); ++attempt) {
        sum = 0.0;
        for (double& v : g) {
            v = gamma(rng);
            sum += v;
        }
    }
    if (!(sum > 0.0)) {
        std::fill(g.begin(), g.end(), 1.0);
        sum = static_cast<double>(g.size());
    }
    out.proportions.resize(g.size());
    out.counts.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.proportions[i] = g[i] / sum;
        out.counts[i] = static_cast<std::size_t>(std::llround(out.proportions[i] * static_cast<double>(total)));
    }
    return out;
}

std::vector<ClassId> SessionSchedule::seen_classes(std::size_t upto) const {
    std::vector<ClassId> out;
    for (std::size_t s = 0; s <= upto && s < sessions.size(); ++s) {
        out.insert(out.end(), sessions[s].classes.begin(), sessions[s].classes.end());
    }
    return model::make_class_set(out);
}

namespace {

struct ClassGeometry {
    std::vector<std::vector<double>> means;
};

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = normal(rng);
            norm += x * x;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

// Fixed random lift from the class embedding space into input space.
std::vector<double> make_lift(const SyntheticTaskSpec& spec) {
    Rng rng = make_rng(spec.seed, "data/lift");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> lift(spec.input_dim * spec.latent_dim);
    for (double& x : lift) x = normal(rng);
    return lift;
}

std::vector<double> mean_direction(const SyntheticTaskSpec& spec, const std::vector<double>& lift, const Tensor& vectors,
                                   std::size_t row, Rng& rng) {
    auto dir = random_unit(spec.input_dim, rng);
    if (spec.alignment <= 0.0) return dir;
    std::vector<double> lifted(spec.input_dim, 0.0);
    double norm = 0.0;
    for (std::size_t k = 0; k < spec.input_dim; ++k) {
        for (std::size_t j = 0; j < spec.latent_dim; ++j) lifted[k] += lift[k * spec.latent_dim + j] * vectors.at(row, j);
        norm += lifted[k] * lifted[k];
    }
    norm = std::max(std::sqrt(norm), 1e-12);
    const double a = std::sqrt(spec.alignment), b = std::sqrt(1.0 - spec.alignment);
    double out = 0.0;
    for (std::size_t k = 0; k < spec.input_dim; ++k) {
        dir[k] = a * lifted[k] / norm + b * dir[k];
        out += dir[k] * dir[k];
    }
    out = std::sqrt(out);
    for (double& x : dir) x /= out;
    return dir;
}

ClassGeometry make_geometry(const SyntheticTaskSpec& spec, const Tensor& vectors) {
    ClassGeometry geo;
    const std::size_t per_domain = spec.tasks * spec.classes_per_task;
    const auto lift = spec.alignment > 0.0 ? make_lift(spec) : std::vector<double>{};
    geo.means.resize(spec.session_count() * spec.classes_per_task);
    for (std::size_t d = 0; d < spec.domains; ++d) {
        Rng rng = make_rng(spec.seed, "data/means/" + std::to_string(d));
        std::vector<double> offset(spec.input_dim, 0.0);
        if (d > 0) {
            offset = random_unit(spec.input_dim, rng);
            for (double& x : offset) x *= spec.cluster_separation;
        }
        for (std::size_t c = 0; c < per_domain; ++c) {
            const std::size_t id = d * per_domain + c;
            auto dir = mean_direction(spec, lift, vectors, id, rng);
            auto& mean = geo.means[id];
            mean.resize(spec.input_dim);
            for (std::size_t k = 0; k < spec.input_dim; ++k) mean[k] = dir[k] * spec.cluster_separation + offset[k];
        }
    }
    return geo;
}

struct Builder {
    std::vector<double> values;
    std::vector<ClassId> labels;
    std::vector<InstanceId> ids;

    void draw(const std::vector<double>& mean, ClassId label, std::size_t count, double sigma, Rng& rng,
              InstanceId& next_id) {
        std::normal_distribution<double> normal(0.0, sigma > 0.0 ? sigma : 1.0);
        for (std::size_t n = 0; n < count; ++n) {
            for (double m : mean) values.push_back(sigma > 0.0 ? m + normal(rng) : m);
            labels.push_back(label);
            ids.push_back(next_id++);
        }
    }

    Tensor features(std::size_t dim) const { return Tensor({labels.size(), dim}, values); }

    void permute(std::span<const std::size_t> order, std::size_t dim) {
        Builder out;
        for (std::size_t r : order) {
            out.values.insert(out.values.end(), values.begin() + static_cast<std::ptrdiff_t>(r * dim),
                              values.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
            out.labels.push_back(labels[r]);
            out.ids.push_back(ids[r]);
        }
        *this = std::move(out);
    }
};

}  // namespace

SessionSchedule generate_tasks(const SyntheticTaskSpec& spec) {
    spec.validate();
    Tensor vectors = class_vectors(spec);
    const ClassGeometry geo = make_geometry(spec, vectors);
    const std::size_t k = spec.classes_per_task;
    const std::size_t dim = spec.input_dim;
    Rng train_rng = make_rng(spec.seed, "data/train");
    Rng eval_rng = make_rng(spec.seed, "data/eval");
    Rng stream_rng = make_rng(spec.seed, "data/stream");
    Rng dirichlet_rng = make_rng(spec.seed, "dirichlet");
    Rng order_rng = make_rng(spec.seed, "shuffle/stream");
    InstanceId next_id = 0;

    SessionSchedule schedule;
    schedule.spec = spec;
    schedule.class_vectors = std::move(vectors);
    schedule.sessions.resize(spec.session_count());
    for (std::size_t s = 0; s < spec.session_count(); ++s) {
        Session& session = schedule.sessions[s];
        session.index = s;
        for (std::size_t c = 0; c < k; ++c) session.classes.push_back(s * k + c);

        Builder train, holdout;
        for (ClassId c : session.classes) train.draw(geo.means[c], c, spec.train_per_class, spec.noise_sigma, train_rng, next_id);
        for (ClassId c : session.classes) holdout.draw(geo.means[c], c, spec.eval_per_class, spec.noise_sigma, eval_rng, next_id);
        session.train = LabeledSet(Split::train, train.features(dim), train.labels, train.ids);
        session.holdout = LabeledSet(Split::holdout, holdout.features(dim), holdout.labels, holdout.ids);
    }

    for (std::size_t s = 0; s < spec.session_count(); ++s) {
        Session& session = schedule.sessions[s];
        Builder stream;
        std::vector<std::size_t> task_of_row;
        for (std::size_t j = 0; j <= s; ++j) {
            const auto& classes = schedule.sessions[j].classes;
            std::vector<std::size_t> counts(classes.size(), spec.ttl_per_class);
            if (spec.imbalance == Imbalance::dirichlet) {
                counts = sample_imbalanced_ttl(classes, spec.ttl_per_class * classes.size(), spec.effective_alpha(),
                                               dirichlet_rng)
                             .counts;
            }
            for (std::size_t c = 0; c < classes.size(); ++c) {
                stream.draw(geo.means[classes[c]], classes[c], counts[c], spec.noise_sigma, stream_rng, next_id);
                task_of_row.insert(task_of_row.end(), counts[c], j);
                session.stream_counts[classes[c]] += counts[c];
            }
        }
        std::vector<std::size_t> order(stream.labels.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);
        if (spec.stream_order == StreamOrder::task_blocked) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return task_of_row[a] < task_of_row[b]; });
        }
        stream.permute(order, dim);
        if (!stream.labels.empty()) session.stream = UnlabeledStream(stream.features(dim), stream.ids);
        session.stream_truth = StreamTruth(stream.labels);
    }
    return schedule;
}

Tensor class_vectors(const SyntheticTaskSpec& spec) {
    return model::ClassEmbeddingTable(spec.total_classes, spec.latent_dim, derive_seed(spec.seed, "classes")).vectors();
}

PretextSet generate_pretext(const SyntheticTaskSpec& spec, std::size_t classes, std::size_t per_class) {
    spec.validate();
    if (classes == 0 || per_class == 0) throw std::invalid_argument("pretext: classes and per_class must be positive");
    PretextSet out;
    out.class_vectors = model::ClassEmbeddingTable(classes, spec.latent_dim, derive_seed(spec.seed, "pretext/classes")).vectors();
    const auto lift = spec.alignment > 0.0 ? make_lift(spec) : std::vector<double>{};
    Rng mean_rng = make_rng(spec.seed, "pretext/means");
    Rng sample_rng = make_rng(spec.seed, "pretext/samples");
    // ids far above anything generate_tasks hands out
    InstanceId next_id = InstanceId{1} << 62;
    Builder b;
    for (std::size_t c = 0; c < classes; ++c) {
        auto mean = mean_direction(spec, lift, out.class_vectors, c, mean_rng);
        for (double& x : mean) x *= spec.cluster_separation;
        b.draw(mean, c, per_class, spec.noise_sigma, sample_rng, next_id);
    }
    out.data = LabeledSet(Split::train, b.features(spec.input_dim), b.labels, b.ids);
    return out;
}

void ReplayBuffer::insert(ReplayItem item) {
    ++seen_;
    if (capacity_ == 0) return;
    if (items_.size() < capacity_) {
        items_.push_back(std::move(item));
        return;
    }
    std::uniform_int_distribution<std::size_t> pick(0, seen_ - 1);
    const std::size_t j = pick(rng_);
    if (j < capacity_) items_[j] = std::move(item);
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t k) {
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, idx.size());
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng_)]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace cttl::data

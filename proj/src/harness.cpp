// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/harness.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cttl/log.hpp"
#include "cttl/rng.hpp"

namespace cttl::harness {

namespace {

constexpr std::size_t kDefaultReplayCapacity = 200;

struct VariantEntry {
    Variant variant;
    std::string_view name;
};

constexpr VariantEntry kVariants[] = {
    {Variant::dosapp, "dosapp"},
    {Variant::finetune_no_ttl, "finetune_no_ttl"},
    {Variant::self_label, "self_label"},
    {Variant::teacher_student_only, "teacher_student_only"},
    {Variant::plus_sparse, "plus_sparse"},
    {Variant::plus_union_single_momentum, "plus_union_single_momentum"},
    {Variant::dosapp_er, "dosapp_er"},
};

// Single-momentum variants smooth every entry with delta.
ema::EmaConfig effective_ema(const ExperimentConfig& cfg, const VariantKnobs& knobs) {
    ema::EmaConfig e = cfg.ema;
    if (!knobs.dual_momentum) e.gamma = e.lambda = e.delta;
    return e;
}

}  // namespace

std::string_view variant_name(Variant v) {
    for (const auto& e : kVariants)
        if (e.variant == v) return e.name;
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (const auto& e : kVariants)
        if (e.name == name) return e.variant;
    throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v = [] {
        std::vector<Variant> out;
        for (const auto& e : kVariants) out.push_back(e.variant);
        return out;
    }();
    return v;
}

VariantKnobs knobs_for(Variant v, std::size_t buffer_capacity) {
    VariantKnobs k;
    k.buffer_capacity = buffer_capacity;
    switch (v) {
        case Variant::dosapp:
            break;
        case Variant::finetune_no_ttl:
            k.use_mask = k.use_union = k.dual_momentum = false;
            k.ttl = TtlMode::none;
            k.eval = EvalModel::student;
            break;
        case Variant::self_label:
            k.use_mask = k.use_union = k.dual_momentum = false;
            k.ttl = TtlMode::self_label;
            k.eval = EvalModel::student;
            break;
        case Variant::teacher_student_only:
            k.use_mask = k.use_union = k.dual_momentum = false;
            break;
        case Variant::plus_sparse:
            k.use_union = k.dual_momentum = false;
            break;
        case Variant::plus_union_single_momentum:
            k.dual_momentum = false;
            break;
        case Variant::dosapp_er:
            if (k.buffer_capacity == 0) k.buffer_capacity = kDefaultReplayCapacity;
            break;
    }
    return k;
}

void ExperimentConfig::validate() const {
    data.validate();
    encoder.validate();
    if (encoder.input_dim != data.input_dim) {
        throw std::invalid_argument("config: encoder input_dim " + std::to_string(encoder.input_dim) +
                                    " differs from data input_dim " + std::to_string(data.input_dim));
    }
    if (data.latent_dim != encoder.embed_dim) {
        throw std::invalid_argument("config: data latent_dim " + std::to_string(data.latent_dim) +
                                    " differs from encoder embed_dim " + std::to_string(encoder.embed_dim));
    }
    logits.validate();
    optimizer.validate();
    pretrain.validate();
    ema.validate();
    if (!(sparsity > 0.0 && sparsity <= 1.0)) throw std::invalid_argument("config: sparsity must lie in (0,1]");
    if (batch_size == 0 || ttl_batch_size == 0 || eval_batch_size == 0) {
        throw std::invalid_argument("config: batch sizes must be positive");
    }
    if (epochs == 0) throw std::invalid_argument("config: epochs must be positive");
}

void PretrainConfig::validate() const {
    if (classes == 0) return;
    if (per_class == 0 || epochs == 0 || batch_size == 0) {
        throw std::invalid_argument("pretrain: per_class, epochs and batch_size must be positive");
    }
    if (!(learning_rate > 0.0)) throw std::invalid_argument("pretrain: learning_rate must be > 0");
}

double pretrain_encoder(ParameterSet& params, const data::PretextSet& pretext, const PretrainConfig& cfg,
                        const model::LogitConfig& logit_cfg, std::uint64_t seed) {
    const data::LabeledSet& set = pretext.data;
    const model::ClassEmbeddingTable table(pretext.class_vectors);
    std::vector<ClassId> classes(table.total_classes());
    std::iota(classes.begin(), classes.end(), 0);
    const auto labels = set.all_labels(data::LabelPurpose::training, nullptr);

    ad::OptimizerConfig opt_cfg;
    opt_cfg.learning_rate = cfg.learning_rate;
    ad::Optimizer opt(opt_cfg);
    Rng shuffle = make_rng(seed, "shuffle/pretrain");
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    double last = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::span<const std::size_t> rows(order.data() + begin, end - begin);
            std::vector<ClassId> y;
            for (std::size_t r : rows) y.push_back(labels[r]);
            params.clear_grads();
            ad::Graph g;
            ad::Var loss = model::model_loss(g, params, table, model::take_rows(set.features(), rows), y, classes,
                                             logit_cfg, model::GradScope::all);
            g.backward(loss);
            opt.step(params);
            last = g.value(loss)[0];
        }
    }
    params.clear_grads();
    return last;
}

LearnerState init_learner(const ExperimentConfig& cfg, std::uint64_t seed) {
    LearnerState s;
    data::SyntheticTaskSpec spec = cfg.data;
    spec.seed = seed;
    s.student = model::init_model(cfg.encoder, derive_seed(seed, "init"));
    if (cfg.pretrain.classes > 0) {
        const auto pretext = data::generate_pretext(spec, cfg.pretrain.classes, cfg.pretrain.per_class);
        pretrain_encoder(s.student, pretext, cfg.pretrain, cfg.logits, seed);
    }
    s.teacher = ema::clone_student_to_teacher(s.student);
    s.table = model::ClassEmbeddingTable(data::class_vectors(spec));
    s.buffer = data::ReplayBuffer(knobs_for(cfg.variant, cfg.buffer_capacity).buffer_capacity, derive_seed(seed, "replay"));
    return s;
}

SupervisedResult run_supervised_session(LearnerState& state, const data::Session& session,
                                        std::span<const ClassId> seen_classes, const ExperimentConfig& cfg,
                                        const VariantKnobs& knobs, std::uint64_t seed, data::DataAudit* audit) {
    SupervisedResult result;
    const data::LabeledSet& train = session.train;
    if (train.empty()) throw std::invalid_argument("supervised session: empty training set");
    const std::vector<ClassId> task_classes = model::make_class_set(session.classes);
    const std::vector<ClassId> seen(seen_classes.begin(), seen_classes.end());
    const std::vector<ClassId>& train_classes = cfg.train_scope == TrainScope::task ? task_classes : seen;
    const bool replay = knobs.buffer_capacity > 0 && !state.buffer.empty();
    const std::vector<ClassId>& loss_classes = replay ? seen : train_classes;

    if (knobs.use_mask) {
        const auto labels = train.all_labels(data::LabelPurpose::training, audit);
        auto scores = sparse::score_parameters(state.student, state.table, train.features(), labels, train_classes,
                                               cfg.logits, cfg.batch_size, cfg.score_sample_cap, session.index);
        Mask mask = sparse::select_topk(scores, cfg.sparsity, cfg.granularity);
        state.history.push(mask, scores);
        result.mask = std::move(mask);
        result.scores = std::move(scores);
    }
    const Mask* mask = result.mask ? &*result.mask : nullptr;

    ad::Optimizer opt(cfg.optimizer);
    ema::SmoothingVectors sv;
    if (knobs.needs_teacher()) {
        ema::EmaConfig e = effective_ema(cfg, knobs);
        e.phase = ema::Phase::supervised;
        sv = mask ? ema::compute_pq(state.student, *mask, e) : ema::uniform_pq(state.student, e.delta);
    }
    const model::GradScope scope = mask ? model::GradScope::candidates : model::GradScope::all;

    Rng shuffle = make_rng(seed, "shuffle/train/" + std::to_string(session.index));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::span<const std::size_t> rows(order.data() + begin, end - begin);
            Tensor x = model::take_rows(train.features(), rows);
            std::vector<ClassId> labels = train.labels(rows, data::LabelPurpose::training, audit);
            std::vector<data::InstanceId> ids;
            for (std::size_t r : rows) ids.push_back(train.ids()[r]);

            if (replay) {
                const auto picks = state.buffer.sample(rows.size());
                std::vector<double> vals = x.data();
                for (std::size_t p : picks) {
                    const auto& item = state.buffer.items()[p];
                    vals.insert(vals.end(), item.features.begin(), item.features.end());
                    labels.push_back(item.label);
                    ids.push_back(item.id);
                }
                x = Tensor({labels.size(), x.cols()}, std::move(vals));
            }

            state.student.clear_grads();
            ad::Graph g;
            ad::Var loss = model::model_loss(g, state.student, state.table, x, labels, loss_classes, cfg.logits, scope);
            g.backward(loss);
            if (audit) audit->record_gradient(data::Split::train, ids);
            opt.step(state.student, mask);
            if (knobs.needs_teacher()) ema::ema_update(state.teacher, state.student, sv);
            result.final_loss = g.value(loss)[0];
            ++result.steps;
        }
    }
    state.student.clear_grads();

    if (knobs.buffer_capacity > 0) {
        const auto labels = train.all_labels(data::LabelPurpose::training, audit);
        const std::size_t dim = train.features().cols();
        for (std::size_t r = 0; r < train.size(); ++r) {
            data::ReplayItem item;
            const auto& v = train.features().data();
            item.features.assign(v.begin() + static_cast<std::ptrdiff_t>(r * dim),
                                 v.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
            item.label = labels[r];
            item.id = train.ids()[r];
            state.buffer.insert(std::move(item));
        }
    }
    return result;
}

std::optional<Mask> ttl_mask(const LearnerState& state, const ExperimentConfig& cfg, const VariantKnobs& knobs) {
    if (!knobs.use_mask) return std::nullopt;
    if (state.history.empty()) throw std::logic_error("ttl_mask: no supervised mask recorded yet");
    if (!knobs.use_union) return state.history.masks.back();
    return sparse::reselect_topk(sparse::union_masks(state.history), state.history, cfg.sparsity, cfg.reselect,
                                 cfg.granularity);
}

ttl::TtlReport run_ttl_session(LearnerState& state, data::Session& session, std::span<const ClassId> seen_classes,
                               const ExperimentConfig& cfg, const VariantKnobs& knobs, std::uint64_t seed,
                               data::DataAudit* audit) {
    if (knobs.ttl == TtlMode::none) return {};
    ttl::TtlStreamConfig stream_cfg;
    stream_cfg.batch_size = cfg.ttl_batch_size;
    stream_cfg.class_set.assign(seen_classes.begin(), seen_classes.end());
    stream_cfg.shuffle_seed = derive_seed(seed, "shuffle");
    stream_cfg.routing = knobs.ttl == TtlMode::self_label ? ttl::RoutingMode::self : ttl::RoutingMode::max_logit;
    stream_cfg.confidence_threshold = cfg.ttl_confidence_threshold;

    ttl::TtlContext ctx;
    ctx.table = &state.table;
    ctx.logits = cfg.logits;
    ctx.optimizer = cfg.optimizer;
    ctx.ema = effective_ema(cfg, knobs);
    ctx.update_teacher = knobs.needs_teacher();
    ctx.audit = audit;

    const std::optional<Mask> mask = ttl_mask(state, cfg, knobs);
    return ttl::ttl_session(state.student, state.teacher, mask ? &*mask : nullptr, session.stream, stream_cfg, ctx);
}

double accuracy(const ParameterSet& params, const model::ClassEmbeddingTable& table, const data::LabeledSet& set,
                std::span<const ClassId> classes, const model::LogitConfig& logit_cfg, std::size_t batch_size,
                data::DataAudit* audit) {
    if (set.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
    const auto labels = set.all_labels(data::LabelPurpose::evaluation, audit);
    if (audit) audit->record_forward(set.split(), set.ids());
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < set.size(); begin += batch_size) {
        const std::size_t end = std::min(set.size(), begin + batch_size);
        const Tensor z = model::logits(params, table, model::slice_rows(set.features(), begin, end), classes, logit_cfg);
        const auto pred = model::argmax_classes(z, classes);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[begin + i];
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

std::vector<double> evaluate(const ParameterSet& params, const model::ClassEmbeddingTable& table,
                             const data::SessionSchedule& schedule, std::size_t upto, const model::LogitConfig& logit_cfg,
                             std::size_t batch_size, data::DataAudit* audit) {
    if (upto >= schedule.size()) throw std::out_of_range("evaluate: session index beyond schedule");
    const auto classes = schedule.seen_classes(upto);
    std::vector<double> row;
    row.reserve(upto + 1);
    for (std::size_t j = 0; j <= upto; ++j) {
        row.push_back(accuracy(params, table, schedule.sessions[j].holdout, classes, logit_cfg, batch_size, audit));
    }
    return row;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, data::DataAudit* audit) {
    data::SyntheticTaskSpec spec = cfg.data;
    spec.seed = seed;
    data::SessionSchedule schedule = data::generate_tasks(spec);
    return run_experiment(cfg, schedule, seed, audit);
}

RunResult run_experiment(const ExperimentConfig& cfg, data::SessionSchedule& schedule, std::uint64_t seed,
                         data::DataAudit* audit) {
    cfg.validate();
    schedule.epochs = cfg.epochs;
    const VariantKnobs knobs = knobs_for(cfg.variant, cfg.buffer_capacity);
    const std::size_t sessions = schedule.size();

    RunResult result{metrics::ResultMatrix(sessions, metrics::Checkpoint::post_supervised),
                     metrics::ResultMatrix(sessions, metrics::Checkpoint::post_ttl),
                     {},
                     {},
                     0.0,
                     {},
                     init_learner(cfg, seed)};
    LearnerState& state = result.final_state;
    state.table = model::ClassEmbeddingTable(schedule.class_vectors);

    {
        const auto all = schedule.seen_classes(sessions - 1);
        double sum = 0.0;
        for (const auto& s : schedule.sessions) {
            sum += accuracy(state.student, state.table, s.holdout, all, cfg.logits, cfg.eval_batch_size, audit);
        }
        result.zero_shot_accuracy = sum / static_cast<double>(sessions);
    }

    for (std::size_t s = 0; s < sessions; ++s) {
        data::Session& session = schedule.sessions[s];
        state.table.activate(session.classes);
        const auto seen = schedule.seen_classes(s);
        SessionLog log;
        log.session = s;

        const SupervisedResult sup = run_supervised_session(state, session, seen, cfg, knobs, seed, audit);
        log.supervised_steps = sup.steps;
        log.train_loss = sup.final_loss;
        log.mask_popcount = sup.mask ? sup.mask->popcount() : 0;
        const ParameterSet& eval_model = [&]() -> const ParameterSet& {
            return knobs.eval == EvalModel::teacher ? state.teacher : state.student;
        }();
        log.post_supervised_row = evaluate(eval_model, state.table, schedule, s, cfg.logits, cfg.eval_batch_size, audit);
        result.post_supervised.push_row(log.post_supervised_row);

        if (knobs.ttl != TtlMode::none) {
            if (auto m = ttl_mask(state, cfg, knobs)) log.ttl_mask_popcount = m->popcount();
            log.ttl = run_ttl_session(state, session, seen, cfg, knobs, seed, audit);
            log.post_ttl_row = evaluate(eval_model, state.table, schedule, s, cfg.logits, cfg.eval_batch_size, audit);
        } else {
            log.post_ttl_row = log.post_supervised_row;
        }
        result.post_ttl.push_row(log.post_ttl_row);
        result.sessions.push_back(std::move(log));
    }
    result.metrics = metrics::compute_metrics(result.post_ttl);
    result.post_supervised_metrics = metrics::compute_metrics(result.post_supervised);
    return result;
}

}  // namespace cttl::harness

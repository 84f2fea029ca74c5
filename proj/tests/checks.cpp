// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "checks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "cttl/commands.hpp"
#include "cttl/ema.hpp"
#include "cttl/metrics.hpp"
#include "cttl/model.hpp"
#include "cttl/report.hpp"
#include "cttl/rng.hpp"
#include "cttl/sparse.hpp"
#include "cttl/ttl.hpp"

namespace cttl::checks {

namespace fs = std::filesystem;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// values with |x| in [0.1, 1], either sign
Tensor away_from_zero(Shape shape, Rng& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
    return t;
}

double rel_error(double a, double n) {
    const double diff = std::abs(a - n);
    if (diff <= kAbsFloor) return 0.0;
    return diff / std::max(std::abs(a), std::abs(n));
}

// ULP distance between two finite doubles of the same sign.
std::uint64_t ulps(double a, double b) {
    const auto ia = std::bit_cast<std::int64_t>(a);
    const auto ib = std::bit_cast<std::int64_t>(b);
    return ia > ib ? static_cast<std::uint64_t>(ia - ib) : static_cast<std::uint64_t>(ib - ia);
}

bool near_exact(double a, double b) { return a == b || ulps(a, b) <= 4; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace

GradCheck check_gradients(const std::string& name, std::vector<Tensor> inputs, const GraphFn& fn, std::uint64_t seed) {
    Rng rng(seed);
    Tensor weights;

    auto loss_of = [&](ad::Graph& g, std::vector<Tensor>& in, bool track) {
        std::vector<ad::Var> vars;
        vars.reserve(in.size());
        for (auto& t : in) vars.push_back(g.parameter(t, track));
        ad::Var out = fn(g, vars);
        const std::size_t n = g.value(out).size();
        if (weights.size() != n) weights = random_tensor({n, 1}, rng);
        return g.mean(g.matmul(g.reshape(out, {1, n}), g.constant(weights)));
    };
    auto value_at = [&](std::vector<Tensor>& in) {
        ad::Graph g;
        return g.value(loss_of(g, in, false))[0];
    };

    {
        ad::Graph g;
        g.backward(loss_of(g, inputs, true));
    }
    GradCheck res;
    res.name = name;
    res.pass = true;
    for (auto& t : inputs) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        t.clear_grad();
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            t[i] = orig + kFdStep;
            const double up = value_at(inputs);
            t[i] = orig - kFdStep;
            const double down = value_at(inputs);
            t[i] = orig;
            const double err = rel_error(analytic[i], (up - down) / (2.0 * kFdStep));
            res.max_rel_error = std::max(res.max_rel_error, err);
            res.pass = res.pass && err < kRelTol;
            ++res.entries;
        }
    }
    return res;
}

std::vector<GradCheck> gradcheck_ops(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gradcheck/inputs"));
    std::vector<GradCheck> out;
    std::uint64_t k = 0;
    auto run = [&](const std::string& name, std::vector<Tensor> in, const GraphFn& fn) {
        out.push_back(check_gradients(name, std::move(in), fn, derive_seed(seed, "gradcheck/" + std::to_string(k++))));
    };
    using Vars = std::span<const ad::Var>;

    run("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)},
        [](ad::Graph& g, Vars v) { return g.matmul(v[0], v[1]); });
    run("transpose", {random_tensor({3, 4}, rng)}, [](ad::Graph& g, Vars v) { return g.transpose(v[0]); });
    run("reshape", {random_tensor({3, 4}, rng)}, [](ad::Graph& g, Vars v) { return g.reshape(v[0], {2, 6}); });
    run("add", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
        [](ad::Graph& g, Vars v) { return g.add(v[0], v[1]); });
    run("add_broadcast", {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng)},
        [](ad::Graph& g, Vars v) { return g.add(v[0], v[1]); });
    run("scale", {random_tensor({3, 4}, rng)}, [](ad::Graph& g, Vars v) { return g.scale(v[0], -2.5); });
    run("relu", {away_from_zero({3, 4}, rng)}, [](ad::Graph& g, Vars v) { return g.relu(v[0]); });
    run("gelu", {random_tensor({3, 4}, rng, -3.0, 3.0)}, [](ad::Graph& g, Vars v) { return g.gelu(v[0]); });
    run("layer_norm", {random_tensor({3, 5}, rng)}, [](ad::Graph& g, Vars v) { return g.layer_norm(v[0]); });
    run("softmax", {random_tensor({3, 5}, rng, -2.0, 2.0)}, [](ad::Graph& g, Vars v) { return g.softmax(v[0]); });
    run("log", {random_tensor({3, 4}, rng, 0.5, 2.0)}, [](ad::Graph& g, Vars v) { return g.log(v[0]); });
    run("mean", {random_tensor({3, 4}, rng)}, [](ad::Graph& g, Vars v) { return g.mean(v[0]); });
    run("cosine_similarity_rows", {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)},
        [](ad::Graph& g, Vars v) { return g.cosine_similarity_rows(v[0], v[1]); });
    run("l2_normalize_rows", {random_tensor({3, 4}, rng)},
        [](ad::Graph& g, Vars v) { return g.l2_normalize_rows(v[0]); });
    run("gather_rows", {random_tensor({4, 3}, rng)},
        [](ad::Graph& g, Vars v) { return g.gather_rows(v[0], {2, 0, 2, 3, 2}); });
    run("concat", {random_tensor({2, 3}, rng), random_tensor({3, 3}, rng)},
        [](ad::Graph& g, Vars v) { return g.concat(v); });
    run("cross_entropy", {random_tensor({4, 5}, rng, -3.0, 3.0)},
        [](ad::Graph& g, Vars v) { return g.cross_entropy(v[0], {1, 4, 0, 1}); });
    return out;
}

GradCheck gradcheck_model(std::uint64_t seed, bool attention) {
    model::EncoderConfig ec;
    ec.input_dim = 8;
    ec.token_count = 2;
    ec.token_dim = 4;
    ec.block_count = 2;
    ec.mlp_hidden_dim = 8;
    ec.embed_dim = 4;
    ec.use_attention = attention;
    ParameterSet params = model::init_model(ec, derive_seed(seed, "gradcheck/model"));
    Rng rng(derive_seed(seed, "gradcheck/model/data"));
    const Tensor x = random_tensor({5, 8}, rng, -2.0, 2.0);
    const model::ClassEmbeddingTable table(4, ec.embed_dim, derive_seed(seed, "gradcheck/model/classes"));
    const std::vector<model::ClassId> classes{0, 1, 2, 3};
    const std::vector<model::ClassId> labels{0, 3, 1, 1, 2};
    const model::LogitConfig lc;

    {
        ad::Graph g;
        g.backward(model::model_loss(g, params, table, x, labels, classes, lc, model::GradScope::all));
    }
    GradCheck res;
    res.name = attention ? "model_2block_attention" : "model_2block";
    res.pass = true;
    for (auto& [path, t] : params.entries()) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            t[i] = orig + kFdStep;
            const double up = model::model_loss(params, table, x, labels, classes, lc);
            t[i] = orig - kFdStep;
            const double down = model::model_loss(params, table, x, labels, classes, lc);
            t[i] = orig;
            const double err = rel_error(analytic[i], (up - down) / (2.0 * kFdStep));
            res.max_rel_error = std::max(res.max_rel_error, err);
            res.pass = res.pass && err < kRelTol;
            ++res.entries;
        }
    }
    params.clear_grads();
    return res;
}

namespace {

ParameterSet ema_params(Rng& rng) {
    ParameterSet p;
    p.add("a.fc1.weight", random_tensor({4, 6}, rng), true);
    p.add("b.fc1.weight", random_tensor({3, 5}, rng), true);
    p.add("c.bias", random_tensor({7}, rng), false);
    return p;
}

Mask random_mask(const ParameterSet& params, Rng& rng, double density = 0.5) {
    std::bernoulli_distribution bit(density);
    Mask m = Mask::filled(params, 0);
    for (auto& [_, bits] : m.bits)
        for (auto& b : bits) b = bit(rng) ? 1 : 0;
    return m;
}

void jitter(ParameterSet& params, Rng& rng) {
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& [_, t] : params.entries())
        for (auto& v : t.data()) v += n(rng);
}

}  // namespace

Outcome ema_pq_sums(std::size_t draws, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/ema/pq"));
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    std::bernoulli_distribution coin(0.5);
    Rng prng(1);
    const ParameterSet params = ema_params(prng);
    double worst = 0.0;
    std::size_t entries = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        ema::EmaConfig cfg;
        cfg.delta = u(rng);
        cfg.gamma = u(rng);
        cfg.lambda = u(rng);
        cfg.phase = coin(rng) ? ema::Phase::supervised : ema::Phase::ttl;
        const Mask m = random_mask(params, rng);
        const auto sv = ema::compute_pq(params, m, cfg);
        for (const auto& [path, p] : sv.p) {
            const auto& q = sv.q.at(path);
            for (std::size_t i = 0; i < p.size(); ++i) {
                worst = std::max(worst, std::abs(p[i] + q[i] - 1.0));
                ++entries;
            }
        }
    }
    return {worst <= 1e-15, "max |p+q-1| = " + fmt(worst) + " over " + std::to_string(entries) + " entries"};
}

Outcome ema_single_momentum_oracle(std::size_t steps, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/ema/single"));
    ParameterSet student = ema_params(rng);
    ParameterSet teacher = ema::clone_student_to_teacher(student);
    ParameterSet oracle = ema::clone_student_to_teacher(student);
    ema::EmaConfig cfg;
    cfg.delta = cfg.gamma = cfg.lambda = 0.97;
    double worst = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        jitter(student, rng);
        cfg.phase = s % 2 ? ema::Phase::ttl : ema::Phase::supervised;
        ema::ema_update(teacher, student, ema::compute_pq(student, random_mask(student, rng), cfg));
        for (auto& [path, t] : oracle.entries()) {
            const auto& sv = student.at(path).data();
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = cfg.delta * t[i] + (1.0 - cfg.delta) * sv[i];
            const auto& tv = teacher.at(path).data();
            for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(tv[i] - t[i]));
        }
        if (worst > 1e-12) break;
    }
    return {worst <= 1e-12, "max per-step deviation " + fmt(worst) + " over " + std::to_string(steps) + " steps"};
}

Outcome ema_closed_form(std::size_t max_steps, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/ema/closed"));
    double worst = 0.0;
    for (const double delta : {0.5, 0.9, 0.99, 0.9999}) {
        ParameterSet student = ema_params(rng);
        ParameterSet teacher = ema_params(rng);
        const ParameterSet initial = ema::clone_student_to_teacher(teacher);
        ema::EmaConfig cfg;
        cfg.delta = delta;
        cfg.gamma = 0.3;
        cfg.lambda = 0.6;
        // per-step masks vary but never touch the non-candidate bias
        for (std::size_t n = 1; n <= max_steps; ++n) {
            ema::ema_update(teacher, student, ema::compute_pq(student, random_mask(student, rng), cfg));
            const double dn = std::pow(delta, static_cast<double>(n));
            const auto& v = initial.at("c.bias").data();
            const auto& s = student.at("c.bias").data();
            const auto& t = teacher.at("c.bias").data();
            for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t[i] - (dn * v[i] + (1.0 - dn) * s[i])));
        }
    }
    return {worst <= 1e-9, "max |t - closed form| = " + fmt(worst) + " for n <= " + std::to_string(max_steps)};
}

namespace {

sparse::ScoreMap random_scores(Rng& rng, double zero_fraction = 0.0) {
    std::bernoulli_distribution zero(zero_fraction);
    sparse::ScoreMap s;
    for (const auto& [path, shape] : std::vector<std::pair<std::string, Shape>>{
             {"block0.mlp.fc1.weight", {30, 1}}, {"block1.mlp.fc1.weight", {8, 8}}, {"block2.mlp.fc1.weight", {7, 1}},
             {"block3.mlp.fc1.weight", {10, 10}}}) {
        Tensor t = random_tensor(shape, rng, 0.0, 1.0);
        for (auto& v : t.data())
            if (zero(rng)) v = 0.0;
        s.scores.emplace(path, std::move(t));
    }
    return s;
}

}  // namespace

Outcome mask_popcounts(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/mask/popcount"));
    std::size_t layers = 0;
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const auto scores = random_scores(rng, trial % 2 ? 0.3 : 0.0);
        // c as a fraction num/den so the expected ceiling is computed in integers
        for (const auto& [num, den] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 10}, {1, 2}, {1, 1}}) {
            const double c = static_cast<double>(num) / static_cast<double>(den);
            const Mask m = sparse::select_topk(scores, c);
            for (const auto& [path, t] : scores.scores) {
                const std::size_t want = (t.size() * num + den - 1) / den;
                if (m.popcount(path) != want) {
                    return {false, path + " c=" + fmt(c) + ": popcount " + std::to_string(m.popcount(path)) +
                                       " != " + std::to_string(want)};
                }
                ++layers;
            }
        }
    }
    return {true, std::to_string(layers) + " layer selections at c in {0.1, 0.5, 1.0}"};
}

Outcome mask_union_monotone(std::size_t tasks, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/mask/union"));
    sparse::MaskHistory history;
    Mask prev;
    for (std::size_t t = 0; t < tasks; ++t) {
        auto scores = random_scores(rng);
        scores.task_id = t;
        Mask m = sparse::select_topk(scores, 0.1);
        history.push(m, scores);
        const Mask u = sparse::union_masks(history);
        for (const auto& [path, bits] : u.bits) {
            for (std::size_t i = 0; i < bits.size(); ++i) {
                if (m.bits.at(path)[i] && !bits[i]) return {false, "union misses a bit of task " + std::to_string(t)};
                if (t > 0 && prev.bits.at(path)[i] && !bits[i])
                    return {false, "union lost a bit at task " + std::to_string(t)};
            }
        }
        prev = u;
    }
    return {true, "union grows monotonically over " + std::to_string(tasks) + " tasks (popcount " +
                      std::to_string(prev.popcount()) + ")"};
}

Outcome mask_reselect_single(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/mask/reselect"));
    for (std::size_t trial = 0; trial < 20; ++trial) {
        for (const double c : {0.1, 0.5, 1.0}) {
            sparse::MaskHistory history;
            const auto scores = random_scores(rng, trial % 2 ? 0.2 : 0.0);
            history.push(sparse::select_topk(scores, c), scores);
            const Mask r = sparse::reselect_topk(sparse::union_masks(history), history, c);
            if (r.bits != history.masks[0].bits) return {false, "reselected mask differs at c=" + fmt(c)};
        }
    }
    return {true, "60 single-task histories reselect to the task mask"};
}

Outcome mask_zero_scores_excluded(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/mask/zero"));
    for (std::size_t trial = 0; trial < 50; ++trial) {
        const auto scores = random_scores(rng, 0.5);
        const double c = 0.1;
        const Mask m = sparse::select_topk(scores, c);
        for (const auto& [path, t] : scores.scores) {
            const auto positive = static_cast<std::size_t>(
                std::count_if(t.data().begin(), t.data().end(), [](double v) { return v > 0.0; }));
            if (positive < sparse::topk_count(c, t.size())) continue;
            const auto& bits = m.bits.at(path);
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (bits[i] && t[i] == 0.0) return {false, path + ": zero-score entry selected"};
            }
        }
    }
    return {true, "no zero-score entry selected across 50 trials"};
}

Outcome routing_oracle(std::size_t pairs, std::size_t max_classes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "check/routing"));
    std::uniform_int_distribution<std::size_t> csize(1, max_classes);
    std::uniform_int_distribution<int> coarse(-3, 3);
    std::normal_distribution<double> fine(0.0, 5.0);
    std::bernoulli_distribution use_coarse(0.4);
    std::size_t ties = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t c = csize(rng);
        // ascending, not necessarily contiguous class ids
        std::vector<model::ClassId> classes;
        for (model::ClassId id = 0; classes.size() < c; ++id)
            if (std::bernoulli_distribution(0.6)(rng)) classes.push_back(id);
        const bool discrete = use_coarse(rng);
        std::vector<double> t(c), s(c);
        for (std::size_t j = 0; j < c; ++j) {
            t[j] = discrete ? coarse(rng) : fine(rng);
            s[j] = discrete ? coarse(rng) : fine(rng);
        }
        const auto d = ttl::route_pseudo_label({t, classes}, {s, classes});

        // enumerate (teacher, 0..C-1) then (student, 0..C-1); the first
        // strictly larger logit wins
        std::size_t best = 0;
        std::vector<double> all(t);
        all.insert(all.end(), s.begin(), s.end());
        for (std::size_t i = 1; i < all.size(); ++i)
            if (all[i] > all[best]) best = i;
        const auto want_src = best < c ? ttl::Source::teacher : ttl::Source::student;
        const auto want_label = classes[best % c];
        const double tmax = *std::max_element(t.begin(), t.end());
        const double smax = *std::max_element(s.begin(), s.end());
        ties += tmax == smax;
        if (d.source != want_src || d.pseudo_label != want_label || d.teacher_max != tmax || d.student_max != smax) {
            return {false, "pair " + std::to_string(k) + " disagrees with the oracle"};
        }
    }
    return {true, std::to_string(pairs) + " pairs match, " + std::to_string(ties) + " with tied maxima"};
}

Outcome metric_fixtures() {
    metrics::ResultMatrix r(2);
    r.push_row({0.8});
    r.push_row({0.6, 0.9});
    const auto m = metrics::compute_metrics(r);
    if (!near_exact(m.average_accuracy, 0.75) || !m.forgetting || !near_exact(*m.forgetting, 0.2) ||
        !near_exact(m.first_task_accuracy, 0.6) || !near_exact(m.current_task_accuracy, 0.85)) {
        return {false, "2x2 fixture: acc " + fmt(m.average_accuracy) + " fgt " + fmt(m.forgetting.value_or(-1)) +
                           " fta " + fmt(m.first_task_accuracy) + " cta " + fmt(m.current_task_accuracy)};
    }
    metrics::ResultMatrix same(3);
    same.push_row({0.7});
    same.push_row({0.7, 0.4});
    same.push_row({0.7, 0.4, 0.9});
    const auto ms = metrics::compute_metrics(same);
    if (!ms.forgetting || *ms.forgetting != 0.0) return {false, "row-identical R: forgetting " + fmt(ms.forgetting.value_or(-1))};
    return {true, "2x2 fixture and row-identical R"};
}

harness::ExperimentConfig tiny_config() {
    harness::ExperimentConfig cfg;
    cfg.data.total_classes = 6;
    cfg.data.tasks = 3;
    cfg.data.classes_per_task = 2;
    cfg.data.train_per_class = 16;
    cfg.data.ttl_per_class = 8;
    cfg.data.eval_per_class = 8;
    cfg.data.input_dim = 16;
    cfg.data.latent_dim = 8;
    cfg.encoder.input_dim = 16;
    cfg.encoder.token_count = 2;
    cfg.encoder.token_dim = 8;
    cfg.encoder.mlp_hidden_dim = 16;
    cfg.encoder.embed_dim = 8;
    cfg.pretrain.classes = 8;
    cfg.pretrain.per_class = 8;
    cfg.pretrain.epochs = 2;
    cfg.pretrain.batch_size = 16;
    cfg.batch_size = 16;
    cfg.epochs = 2;
    cfg.ttl_batch_size = 10;
    cfg.eval_batch_size = 32;
    return cfg;
}

config::RunConfig tiny_run_config() {
    config::RunConfig rc;
    rc.experiment = tiny_config();
    rc.seeds = {0};
    rc.resolve();
    return rc;
}

Outcome leakage_audit(const harness::ExperimentConfig& cfg, std::uint64_t seed) {
    data::SyntheticTaskSpec spec = cfg.data;
    spec.seed = seed;
    data::SessionSchedule schedule = data::generate_tasks(spec);
    schedule.epochs = cfg.epochs;
    std::set<data::InstanceId> stream_ids, holdout_ids;
    for (const auto& s : schedule.sessions) {
        stream_ids.insert(s.stream.ids().begin(), s.stream.ids().end());
        holdout_ids.insert(s.holdout.ids().begin(), s.holdout.ids().end());
    }
    data::DataAudit audit;
    harness::run_experiment(cfg, schedule, seed, &audit);

    const auto& grads = audit.gradient_counts(data::Split::stream);
    for (const auto id : stream_ids) {
        const auto it = grads.find(id);
        const std::size_t n = it == grads.end() ? 0 : it->second;
        if (n != 1) return {false, "stream instance " + std::to_string(id) + " in " + std::to_string(n) + " gradient steps"};
    }
    if (grads.size() != stream_ids.size()) return {false, "gradient records for ids outside the streams"};
    if (!audit.gradient_counts(data::Split::holdout).empty()) return {false, "holdout instance reached a gradient"};
    for (const auto& [id, _] : audit.gradient_counts(data::Split::train))
        if (holdout_ids.count(id) || stream_ids.count(id)) return {false, "train gradient on a stream or holdout id"};
    const std::size_t stream_labels = audit.label_reads(data::Split::stream, data::LabelPurpose::training) +
                                      audit.label_reads(data::Split::stream, data::LabelPurpose::evaluation);
    if (stream_labels != 0) return {false, std::to_string(stream_labels) + " stream labels read"};
    if (audit.label_reads(data::Split::holdout, data::LabelPurpose::training) != 0)
        return {false, "holdout labels read for training"};
    for (const auto& s : schedule.sessions)
        if (!s.stream.consumed()) return {false, "stream of session " + std::to_string(s.index) + " never consumed"};
    return {true, std::to_string(stream_ids.size()) + " stream instances, one gradient step each; " +
                      std::to_string(holdout_ids.size()) + " holdout instances, none in a gradient; 0 stream labels read"};
}

namespace {

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = report::read_text(e.path());
    return files;
}

}  // namespace

Outcome manifest_reproducible(const config::RunConfig& cfg, std::uint64_t seed, const std::string& scratch) {
    const fs::path base(scratch);
    fs::remove_all(base);
    const config::Manifest manifest = make_manifest(cfg, seed);
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* name : {"a", "b"}) {
        const fs::path dir = base / name;
        cli::run_manifest(manifest, dir / "run");
        // manifest reloaded from disk for the second execution path
        const auto reloaded = config::load_manifest(dir / "run" / "manifest.json");
        if (config::manifest_json(reloaded).dump() != config::manifest_json(manifest).dump())
            return {false, "manifest did not round-trip"};
        std::ostringstream sink;
        cli::cmd_report({dir / "run"}, dir / "report", sink);
        trees.push_back(read_tree(dir));
    }
    if (trees[0] != trees[1]) {
        for (const auto& [name, text] : trees[0]) {
            auto it = trees[1].find(name);
            if (it == trees[1].end() || it->second != text) return {false, name + " differs between executions"};
        }
        return {false, "file sets differ"};
    }
    std::size_t csv = 0;
    for (const auto& [name, _] : trees[0]) csv += name.ends_with(".csv");
    return {true, std::to_string(trees[0].size()) + " artifacts (" + std::to_string(csv) + " CSV) byte-identical"};
}

}  // namespace cttl::checks

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cttl::config {

namespace {

using nlohmann::ordered_json;

enum class Kind { integer, real, boolean, text };

struct Field {
    std::string key;
    Kind kind;
    bool experiment;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        const std::string item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!item.empty()) out.push_back(item);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::uint64_t parse_u64(std::string_view v) {
    const std::string s = trim(v);
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
    }
    return out;
}

double parse_double(std::string_view v) {
    const std::string s = trim(v);
    double out = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty() || std::isnan(out)) {
        throw std::invalid_argument("expected a number, got '" + s + "'");
    }
    return out;
}

bool parse_bool(std::string_view v) {
    const std::string s = trim(v);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

std::string format_double(double v) {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

template <class E>
struct EnumName {
    E value;
    const char* name;
};

template <class E, std::size_t N>
E parse_enum(std::string_view v, const EnumName<E> (&names)[N]) {
    const std::string s = trim(v);
    for (const auto& n : names)
        if (s == n.name) return n.value;
    std::string allowed;
    for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : "|") + n.name;
    throw std::invalid_argument("expected one of " + allowed + ", got '" + s + "'");
}

template <class E, std::size_t N>
std::string enum_name(E v, const EnumName<E> (&names)[N]) {
    for (const auto& n : names)
        if (n.value == v) return n.name;
    return "?";
}

const EnumName<harness::TrainScope> kScopes[] = {{harness::TrainScope::task, "task"}, {harness::TrainScope::seen, "seen"}};
const EnumName<data::Imbalance> kImbalance[] = {{data::Imbalance::balanced, "balanced"},
                                                {data::Imbalance::dirichlet, "dirichlet"}};
const EnumName<data::StreamOrder> kOrder[] = {{data::StreamOrder::mixed, "mixed"},
                                              {data::StreamOrder::task_blocked, "task_blocked"}};
const EnumName<ad::OptimizerKind> kOptim[] = {{ad::OptimizerKind::sgd, "sgd"}, {ad::OptimizerKind::adamw, "adamw"}};
const EnumName<sparse::Granularity> kGranularity[] = {{sparse::Granularity::per_layer, "per_layer"},
                                                      {sparse::Granularity::global, "global"}};
const EnumName<sparse::ReselectScore> kReselect[] = {{sparse::ReselectScore::max, "max"},
                                                     {sparse::ReselectScore::latest, "latest"},
                                                     {sparse::ReselectScore::mean, "mean"}};

template <class Access>
Field size_field(std::string key, Access acc, bool experiment = true) {
    return {std::move(key), Kind::integer, experiment,
            [acc](RunConfig& c, std::string_view v) { acc(c) = static_cast<std::size_t>(parse_u64(v)); },
            [acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Field real_field(std::string key, Access acc) {
    return {std::move(key), Kind::real, true, [acc](RunConfig& c, std::string_view v) { acc(c) = parse_double(v); },
            [acc](const RunConfig& c) { return format_double(acc(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Field bool_field(std::string key, Access acc) {
    return {std::move(key), Kind::boolean, true, [acc](RunConfig& c, std::string_view v) { acc(c) = parse_bool(v); },
            [acc](const RunConfig& c) { return std::string(acc(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class Access, class E, std::size_t N>
Field enum_field(std::string key, Access acc, const EnumName<E> (&names)[N]) {
    return {std::move(key), Kind::text, true,
            [acc, &names](RunConfig& c, std::string_view v) { acc(c) = parse_enum(v, names); },
            [acc, &names](const RunConfig& c) { return enum_name(acc(const_cast<RunConfig&>(c)), names); }};
}

#define CTTL_ACC(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        v.push_back({"run.variant", Kind::text, true,
                     [](RunConfig& c, std::string_view s) { c.experiment.variant = harness::parse_variant(trim(s)); },
                     [](const RunConfig& c) { return std::string(harness::variant_name(c.experiment.variant)); }});
        v.push_back({"run.seeds", Kind::text, false, [](RunConfig& c, std::string_view s) { c.seeds = parse_seeds(s); },
                     [](const RunConfig& c) {
                         std::string out;
                         for (auto s : c.seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
                         return out;
                     }});
        v.push_back({"run.out", Kind::text, false, [](RunConfig& c, std::string_view s) { c.out_dir = trim(s); },
                     [](const RunConfig& c) { return c.out_dir; }});
        v.push_back(enum_field("run.train_scope", CTTL_ACC(experiment.train_scope), kScopes));
        v.push_back(size_field("run.eval_batch_size", CTTL_ACC(experiment.eval_batch_size)));

        v.push_back(size_field("data.total_classes", CTTL_ACC(experiment.data.total_classes)));
        v.push_back(size_field("data.tasks", CTTL_ACC(experiment.data.tasks)));
        v.push_back(size_field("data.classes_per_task", CTTL_ACC(experiment.data.classes_per_task)));
        v.push_back(size_field("data.train_per_class", CTTL_ACC(experiment.data.train_per_class)));
        v.push_back(size_field("data.ttl_per_class", CTTL_ACC(experiment.data.ttl_per_class)));
        v.push_back(size_field("data.eval_per_class", CTTL_ACC(experiment.data.eval_per_class)));
        v.push_back(size_field("data.input_dim", CTTL_ACC(experiment.data.input_dim)));
        v.push_back(real_field("data.cluster_separation", CTTL_ACC(experiment.data.cluster_separation)));
        v.push_back(real_field("data.noise_sigma", CTTL_ACC(experiment.data.noise_sigma)));
        v.push_back(real_field("data.alignment", CTTL_ACC(experiment.data.alignment)));
        v.push_back(enum_field("data.imbalance", CTTL_ACC(experiment.data.imbalance), kImbalance));
        v.push_back(real_field("data.dirichlet_alpha", CTTL_ACC(experiment.data.dirichlet_alpha)));
        v.push_back(enum_field("data.stream_order", CTTL_ACC(experiment.data.stream_order), kOrder));
        v.push_back(size_field("data.domains", CTTL_ACC(experiment.data.domains)));

        v.push_back(size_field("model.token_count", CTTL_ACC(experiment.encoder.token_count)));
        v.push_back(size_field("model.token_dim", CTTL_ACC(experiment.encoder.token_dim)));
        v.push_back(size_field("model.block_count", CTTL_ACC(experiment.encoder.block_count)));
        v.push_back(size_field("model.mlp_hidden_dim", CTTL_ACC(experiment.encoder.mlp_hidden_dim)));
        v.push_back(size_field("model.embed_dim", CTTL_ACC(experiment.encoder.embed_dim)));
        v.push_back(bool_field("model.use_attention", CTTL_ACC(experiment.encoder.use_attention)));
        v.push_back(real_field("model.init_scale", CTTL_ACC(experiment.encoder.init_scale)));
        v.push_back(real_field("model.temperature", CTTL_ACC(experiment.logits.temperature)));

        v.push_back(size_field("pretrain.classes", CTTL_ACC(experiment.pretrain.classes)));
        v.push_back(size_field("pretrain.per_class", CTTL_ACC(experiment.pretrain.per_class)));
        v.push_back(size_field("pretrain.epochs", CTTL_ACC(experiment.pretrain.epochs)));
        v.push_back(size_field("pretrain.batch_size", CTTL_ACC(experiment.pretrain.batch_size)));
        v.push_back(real_field("pretrain.learning_rate", CTTL_ACC(experiment.pretrain.learning_rate)));

        v.push_back(enum_field("optim.kind", CTTL_ACC(experiment.optimizer.kind), kOptim));
        v.push_back(real_field("optim.learning_rate", CTTL_ACC(experiment.optimizer.learning_rate)));
        v.push_back(real_field("optim.beta1", CTTL_ACC(experiment.optimizer.beta1)));
        v.push_back(real_field("optim.beta2", CTTL_ACC(experiment.optimizer.beta2)));
        v.push_back(real_field("optim.weight_decay", CTTL_ACC(experiment.optimizer.weight_decay)));
        v.push_back(real_field("optim.epsilon", CTTL_ACC(experiment.optimizer.epsilon)));
        v.push_back(size_field("optim.batch_size", CTTL_ACC(experiment.batch_size)));
        v.push_back(size_field("optim.epochs", CTTL_ACC(experiment.epochs)));

        v.push_back(real_field("ema.delta", CTTL_ACC(experiment.ema.delta)));
        v.push_back(real_field("ema.gamma", CTTL_ACC(experiment.ema.gamma)));
        v.push_back(real_field("ema.lambda", CTTL_ACC(experiment.ema.lambda)));

        v.push_back(real_field("sparse.sparsity", CTTL_ACC(experiment.sparsity)));
        v.push_back(enum_field("sparse.granularity", CTTL_ACC(experiment.granularity), kGranularity));
        v.push_back(enum_field("sparse.reselect", CTTL_ACC(experiment.reselect), kReselect));
        v.push_back(size_field("sparse.score_sample_cap", CTTL_ACC(experiment.score_sample_cap)));

        v.push_back(size_field("ttl.batch_size", CTTL_ACC(experiment.ttl_batch_size)));
        v.push_back(real_field("ttl.confidence_threshold", CTTL_ACC(experiment.ttl_confidence_threshold)));

        v.push_back(size_field("replay.capacity", CTTL_ACC(experiment.buffer_capacity)));

        v.push_back({"ablate.variants", Kind::text, false,
                     [](RunConfig& c, std::string_view s) {
                         c.ablate_variants.clear();
                         for (const auto& name : split(s, ',')) c.ablate_variants.push_back(harness::parse_variant(name));
                     },
                     [](const RunConfig& c) {
                         std::string out;
                         for (auto v : c.ablate_variants) out += (out.empty() ? "" : ",") + std::string(harness::variant_name(v));
                         return out;
                     }});
        v.push_back({"ablate.momentum_grid", Kind::text, false,
                     [](RunConfig& c, std::string_view s) { c.momentum_grid = parse_momentum_grid(s); },
                     [](const RunConfig& c) {
                         std::string out;
                         for (const auto& m : c.momentum_grid) {
                             out += (out.empty() ? "" : ";") + format_double(m.gamma) + ":" + format_double(m.lambda) + ":" +
                                    format_double(m.delta);
                         }
                         return out;
                     }});
        return v;
    }();
    return f;
}

#undef CTTL_ACC

const Field& field(std::string_view key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

}  // namespace

void RunConfig::resolve() {
    experiment.encoder.input_dim = experiment.data.input_dim;
    experiment.data.latent_dim = experiment.encoder.embed_dim;
    if (seeds.empty()) throw std::invalid_argument("config: run.seeds must list at least one seed");
    experiment.validate();
}

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
}

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    const Field& f = field(key);
    try {
        f.set(cfg, value);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config: " + f.key + ": " + e.what());
    }
}

std::string get_value(const RunConfig& cfg, std::string_view key) { return field(key).get(cfg); }

void apply_override(RunConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw std::invalid_argument("config: override '" + std::string(assignment) + "' is not section.key=value");
    }
    set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text, const std::string& source) {
    RunConfig cfg;
    std::set<std::string> sections;
    for (const auto& f : fields()) sections.insert(section_of(f.key));
    std::set<std::string> seen;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        // trailing comments need whitespace before the marker, which keeps
        // "a;b" lists intact
        for (std::size_t i = 1; i < line.size(); ++i) {
            if ((line[i] == '#' || line[i] == ';') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line = trim(std::string_view(line).substr(0, i));
                break;
            }
        }
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config: " + where + "malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!sections.count(section)) throw std::invalid_argument("config: " + where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: " + where + "expected key = value");
        if (section.empty()) throw std::invalid_argument("config: " + where + "key outside of any section");
        const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto hash = value.find(" #");
        if (hash != std::string::npos) value = trim(std::string_view(value).substr(0, hash));
        if (!seen.insert(key).second) throw std::invalid_argument("config: " + where + "duplicate key '" + key + "'");
        try {
            set_value(cfg, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_ini(const RunConfig& cfg) {
    std::string out, section;
    for (const auto& f : fields()) {
        const std::string s = section_of(f.key);
        if (s != section) {
            out += (out.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += f.key.substr(s.size() + 1) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

ordered_json experiment_json(const RunConfig& cfg) {
    ordered_json j = ordered_json::object();
    for (const auto& f : fields()) {
        if (!f.experiment) continue;
        const std::string s = section_of(f.key);
        const std::string k = f.key.substr(s.size() + 1);
        const std::string v = f.get(cfg);
        switch (f.kind) {
            case Kind::integer: j[s][k] = parse_u64(v); break;
            case Kind::real: {
                const double d = parse_double(v);
                if (std::isfinite(d)) j[s][k] = d;
                else j[s][k] = v;
                break;
            }
            case Kind::boolean: j[s][k] = parse_bool(v); break;
            case Kind::text: j[s][k] = v; break;
        }
    }
    return j;
}

void apply_experiment_json(RunConfig& cfg, const ordered_json& j) {
    if (!j.is_object()) throw std::invalid_argument("manifest: config must be an object");
    for (const auto& [s, body] : j.items()) {
        if (!body.is_object()) throw std::invalid_argument("manifest: section '" + s + "' must be an object");
        for (const auto& [k, value] : body.items()) {
            const std::string key = s + "." + k;
            if (!field(key).experiment) throw std::invalid_argument("manifest: key '" + key + "' is not part of a run config");
            std::string text;
            if (value.is_string()) text = value.get<std::string>();
            else if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
            else if (value.is_number_unsigned()) text = std::to_string(value.get<std::uint64_t>());
            else if (value.is_number()) text = format_double(value.get<double>());
            else throw std::invalid_argument("manifest: key '" + key + "' has an unsupported value");
            set_value(cfg, key, text);
        }
    }
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = experiment_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Manifest make_manifest(const RunConfig& cfg, std::uint64_t seed) {
    Manifest m;
    m.config = cfg;
    m.config.seeds = {seed};
    m.seed = seed;
    m.hash = config_hash(cfg);
    return m;
}

ordered_json manifest_json(const Manifest& m) {
    ordered_json j;
    j["manifest_version"] = m.version;
    j["seed"] = m.seed;
    j["config_hash"] = m.hash;
    j["config"] = experiment_json(m.config);
    return j;
}

Manifest parse_manifest(const ordered_json& j) {
    if (!j.is_object() || !j.contains("manifest_version")) throw std::invalid_argument("manifest: missing manifest_version");
    const int version = j.at("manifest_version").get<int>();
    if (version != kManifestVersion) {
        throw std::invalid_argument("manifest: version " + std::to_string(version) + " is not supported (expected " +
                                    std::to_string(kManifestVersion) + ")");
    }
    Manifest m;
    m.version = version;
    m.seed = j.at("seed").get<std::uint64_t>();
    apply_experiment_json(m.config, j.at("config"));
    m.config.seeds = {m.seed};
    m.hash = j.at("config_hash").get<std::string>();
    if (m.hash != config_hash(m.config)) throw std::invalid_argument("manifest: config_hash does not match the stored config");
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("manifest: cannot open " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("manifest: " + path.string() + ": " + e.what());
    }
    return parse_manifest(j);
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
    std::vector<std::uint64_t> out;
    for (const auto& s : split(text, ',')) {
        // "a-b" is an inclusive range
        const auto dash = s.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(parse_u64(s));
            continue;
        }
        const std::uint64_t lo = parse_u64(s.substr(0, dash));
        const std::uint64_t hi = parse_u64(s.substr(dash + 1));
        if (hi < lo || hi - lo > 100000) throw std::invalid_argument("bad seed range '" + s + "'");
        for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("expected a comma separated seed list");
    return out;
}

std::vector<MomentumPoint> parse_momentum_grid(std::string_view text) {
    std::vector<MomentumPoint> out;
    for (const auto& item : split(text, ';')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) throw std::invalid_argument("momentum grid entries are gamma:lambda:delta, got '" + item + "'");
        out.push_back({parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])});
    }
    return out;
}

}  // namespace cttl::config

// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cttl::io {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'T', 'T', 'L', 'C', 'K', 'P', 'T'};
// Guards against absurd lengths from a corrupt file.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
}

std::uint64_t get_count(std::istream& in, const char* what) {
    const std::uint64_t n = get_u64(in);
    if (n > kMaxCount) throw std::runtime_error(std::string("checkpoint: implausible ") + what + " count");
    return n;
}

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

std::uint8_t get_u8(std::istream& in) {
    char c;
    if (!in.get(c)) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint8_t>(c);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint64_t n = get_count(in, "string");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_f64(out, v);
}

Tensor get_tensor(std::istream& in) {
    const std::uint64_t rank = get_count(in, "rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_count(in, "dimension");
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_f64(in);
    return Tensor(std::move(shape), std::move(values));
}

void put_mask(std::ostream& out, const Mask& mask) {
    put_f64(out, mask.sparsity);
    put_u8(out, static_cast<std::uint8_t>(mask.origin));
    put_u64(out, mask.bits.size());
    for (const auto& [path, bits] : mask.bits) {
        put_string(out, path);
        put_u64(out, bits.size());
        for (std::size_t i = 0; i < bits.size(); i += 8) {
            std::uint8_t byte = 0;
            for (std::size_t k = 0; k < 8 && i + k < bits.size(); ++k) byte |= static_cast<std::uint8_t>((bits[i + k] ? 1 : 0) << k);
            put_u8(out, byte);
        }
    }
}

Mask get_mask(std::istream& in) {
    Mask mask;
    mask.sparsity = get_f64(in);
    const std::uint8_t origin = get_u8(in);
    if (origin > static_cast<std::uint8_t>(MaskOrigin::union_reselected)) throw std::runtime_error("checkpoint: bad mask origin");
    mask.origin = static_cast<MaskOrigin>(origin);
    const std::uint64_t layers = get_count(in, "mask layer");
    for (std::uint64_t l = 0; l < layers; ++l) {
        std::string path = get_string(in);
        std::vector<std::uint8_t> bits(get_count(in, "mask bit"));
        for (std::size_t i = 0; i < bits.size(); i += 8) {
            const std::uint8_t byte = get_u8(in);
            for (std::size_t k = 0; k < 8 && i + k < bits.size(); ++k) bits[i + k] = (byte >> k) & 1;
        }
        mask.bits.emplace(std::move(path), std::move(bits));
    }
    return mask;
}

void put_scores(std::ostream& out, const sparse::ScoreMap& scores) {
    put_u64(out, scores.task_id);
    put_u64(out, scores.sample_count);
    put_u64(out, scores.scores.size());
    for (const auto& [path, t] : scores.scores) {
        put_string(out, path);
        put_tensor(out, t);
    }
}

sparse::ScoreMap get_scores(std::istream& in) {
    sparse::ScoreMap s;
    s.task_id = get_u64(in);
    s.sample_count = get_u64(in);
    const std::uint64_t n = get_count(in, "score layer");
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string path = get_string(in);
        s.scores.emplace(std::move(path), get_tensor(in));
    }
    return s;
}

void put_header(std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, kCheckpointVersion);
}

void check_header(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
    const std::uint64_t version = get_u64(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    }
}

void put_params_body(std::ostream& out, const ParameterSet& params) {
    put_u64(out, params.size());
    for (const auto& [path, t] : params.entries()) {
        put_string(out, path);
        put_u8(out, params.is_candidate(path) ? 1 : 0);
        put_tensor(out, t);
    }
}

ParameterSet get_params_body(std::istream& in) {
    ParameterSet params;
    const std::uint64_t n = get_count(in, "parameter");
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string path = get_string(in);
        const bool candidate = get_u8(in) != 0;
        params.add(path, get_tensor(in), candidate);
    }
    return params;
}

}  // namespace

void write_parameters(std::ostream& out, const ParameterSet& params) {
    put_header(out);
    put_params_body(out, params);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

ParameterSet read_parameters(std::istream& in) {
    check_header(in);
    return get_params_body(in);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    if (ckpt.history.masks.size() != ckpt.history.scores.size()) {
        throw std::invalid_argument("checkpoint: mask and score history lengths differ");
    }
    put_header(out);
    put_params_body(out, ckpt.student);
    put_params_body(out, ckpt.teacher);
    put_u64(out, ckpt.history.size());
    for (std::size_t i = 0; i < ckpt.history.size(); ++i) {
        put_mask(out, ckpt.history.masks[i]);
        put_scores(out, ckpt.history.scores[i]);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
    check_header(in);
    Checkpoint ckpt;
    ckpt.student = get_params_body(in);
    ckpt.teacher = get_params_body(in);
    const std::uint64_t n = get_count(in, "history");
    for (std::uint64_t i = 0; i < n; ++i) {
        Mask m = get_mask(in);
        ckpt.history.push(std::move(m), get_scores(in));
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace cttl::io

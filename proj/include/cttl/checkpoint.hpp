// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "cttl/params.hpp"
#include "cttl/sparse.hpp"

namespace cttl::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Student, teacher and the per-task mask/score history.
struct Checkpoint {
    ParameterSet student;
    ParameterSet teacher;
    sparse::MaskHistory history;
};

// Little-endian binary. Values are stored as raw float64 so a round trip is
// bit-exact; masks are bit-packed.
void write_parameters(std::ostream& out, const ParameterSet& params);
ParameterSet read_parameters(std::istream& in);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cttl::io

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "hnlg/params.hpp"

namespace hnlg::numkit {

inline constexpr char kCheckpointMagic[4] = {'H', 'N', 'L', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   "HNLG" | version u32 | { name_len u64 | name bytes | rank u64 |
///   dims u64[rank] | payload f64[prod(dims)] }*
/// Parameters are written in name order. Gradients are not stored.
void write_checkpoint(std::ostream& out, const ParamSet& params);
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);

ParamSet read_checkpoint(std::istream& in, std::uint64_t seed = 0);
ParamSet load_checkpoint(const std::filesystem::path& path, std::uint64_t seed = 0);

}  // namespace hnlg::numkit

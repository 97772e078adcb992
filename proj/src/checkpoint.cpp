// SPDX-License-Identifier: Apache-2.0
#include "hnlg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hnlg/error.hpp"

namespace hnlg::numkit {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 4);
}

bool get_bytes(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!get_bytes(in, reinterpret_cast<char*>(b), 8)) throw ParseError(std::string("checkpoint truncated in ") + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamSet& params) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  for (const auto& [name, t] : params) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParamSet read_checkpoint(std::istream& in, std::uint64_t seed) {
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw ParseError("not a checkpoint (bad magic)");
  unsigned char vb[4];
  if (!get_bytes(in, reinterpret_cast<char*>(vb), 4)) throw ParseError("checkpoint truncated in version");
  const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));

  ParamSet params(seed);
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get_u64(in, "name length");
    if (len > (1u << 20)) throw ParseError("checkpoint name length " + std::to_string(len) + " is implausible");
    std::string name(len, '\0');
    if (!get_bytes(in, name.data(), len)) throw ParseError("checkpoint truncated in name");
    const auto rank = get_u64(in, "rank");
    if (rank == 0 || rank > 8) throw ParseError("checkpoint rank " + std::to_string(rank) + " for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in, "dims");
    Tensor t(shape);
    for (auto& v : t.data()) v = std::bit_cast<double>(get_u64(in, "payload"));
    params.insert(name, std::move(t));
  }
  return params;
}

ParamSet load_checkpoint(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return read_checkpoint(in, seed);
}

}  // namespace hnlg::numkit

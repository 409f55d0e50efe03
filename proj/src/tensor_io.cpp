// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace dragforge {

namespace {

constexpr std::string_view kDftMagic = "DFT1";
constexpr std::string_view kNpyMagic = "\x93NUMPY";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  }
  return v;
}

void put_floats(std::string& out, std::span<const float> vals) {
  const std::size_t start = out.size();
  out.resize(start + vals.size() * 4);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(vals[i]);
    for (int k = 0; k < 4; ++k) out[start + 4 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xffu);
  }
}

std::vector<float> get_floats(std::string_view b, std::size_t off, std::size_t count) {
  std::vector<float> vals(count);
  for (std::size_t i = 0; i < count; ++i) vals[i] = std::bit_cast<float>(get_u32(b, off + 4 * i));
  return vals;
}

void check_extent(std::uint64_t h, std::uint64_t w, std::uint64_t c, const std::string& source) {
  if (h < 1 || w < 1 || c < 1 || h > kMaxGridSide || w > kMaxGridSide || c > kMaxGridChannels) {
    throw DataError(source + ": grid shape " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                    std::to_string(c) + " outside the accepted range (max " +
                    std::to_string(kMaxGridSide) + "x" + std::to_string(kMaxGridSide) + "x" +
                    std::to_string(kMaxGridChannels) + ")");
  }
}

GridTensor finish(int h, int w, int c, std::vector<float> vals, const std::string& source) {
  GridTensor g(h, w, c, std::move(vals));
  try {
    require_finite(g, source);
  } catch (const NumericError& e) {
    throw DataError(e.what());
  }
  return g;
}

GridTensor decode_dft(std::string_view b, const std::string& source) {
  if (b.size() < 16) throw DataError(source + ": truncated DFT1 header");
  const auto h = get_u32(b, 4), w = get_u32(b, 8), c = get_u32(b, 12);
  check_extent(h, w, c, source);
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  if (b.size() != 16 + 4 * count) {
    throw DataError(source + ": DFT1 payload is " + std::to_string(b.size() - 16) +
                    " bytes, expected " + std::to_string(4 * count));
  }
  return finish(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                get_floats(b, 16, count), source);
}

GridTensor decode_npy(std::string_view b, const std::string& source) {
  if (b.size() < 10) throw DataError(source + ": truncated NPY preamble");
  if (b[6] != 1 || b[7] != 0) {
    throw DataError(source + ": only NPY version 1.0 is supported");
  }
  const std::size_t hlen = static_cast<unsigned char>(b[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(b[9])) << 8);
  if (b.size() < 10 + hlen) throw DataError(source + ": truncated NPY header");
  const std::string header(b.substr(10, hlen));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')")) || m[1] != "<f4") {
    throw DataError(source + ": NPY dtype must be '<f4'");
  }
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))")) ||
      m[1] != "False") {
    throw DataError(source + ": NPY array must be C-ordered");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw DataError(source + ": NPY header lacks a shape");
  }
  std::vector<std::uint64_t> dims;
  std::stringstream ss(m[1].str());
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto first = tok.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    dims.push_back(std::stoull(tok.substr(first)));
  }
  if (dims.size() != 3) {
    throw DataError(source + ": NPY array must be 3-D, got " + std::to_string(dims.size()) + "-D");
  }
  check_extent(dims[0], dims[1], dims[2], source);
  const std::size_t count = dims[0] * dims[1] * dims[2];
  const std::size_t off = 10 + hlen;
  if (b.size() != off + 4 * count) {
    throw DataError(source + ": NPY payload size mismatch");
  }
  return finish(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                get_floats(b, off, count), source);
}

}  // namespace

std::string encode_dft(const GridTensor& grid) {
  std::string out(kDftMagic);
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  put_floats(out, grid.values());
  return out;
}

std::string encode_npy(const GridTensor& grid) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                     std::to_string(grid.height()) + ", " + std::to_string(grid.width()) + ", " +
                     std::to_string(grid.channels()) + "), }";
  // Preamble plus dict padded to a multiple of 64 bytes, newline-terminated.
  const std::size_t total = 10 + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict.push_back('\n');
  std::string out(kNpyMagic);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<char>(dict.size() & 0xff));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
  out += dict;
  put_floats(out, grid.values());
  return out;
}

GridTensor decode_grid(std::string_view bytes, const std::string& source) {
  if (bytes.substr(0, 4) == kDftMagic) return decode_dft(bytes, source);
  if (bytes.substr(0, 6) == kNpyMagic) return decode_npy(bytes, source);
  throw DataError(source + ": unrecognized tensor format (expected DFT1 or NPY)");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

GridTensor read_grid(const std::filesystem::path& path) {
  return decode_grid(read_file(path), path.string());
}

void write_grid(const std::filesystem::path& path, const GridTensor& grid, TensorFormat format) {
  write_file(path, format == TensorFormat::dft1 ? encode_dft(grid) : encode_npy(grid));
}

}  // namespace dragforge

// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "dragforge/grid.hpp"
#include "dragforge/tensor_io.hpp"
#include "oracles.hpp"

using namespace dragforge;

namespace {

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return s;
}

std::string f32(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return le32(u);
}

std::string npy_bytes(const std::string& dict, const std::vector<float>& values) {
  std::string header = dict;
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::string out = "\x93NUMPY";
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xff));
  out.push_back(static_cast<char>(header.size() >> 8));
  out += header;
  for (float v : values) out += f32(v);
  return out;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("bilinear sample is exact at integer coordinates") {
    GridTensor g(2, 2, 1, std::vector<float>{1, 2, 3, 4});
    CHECK(bilinear_sample(g, {0, 0})[0] == 1.0f);
    CHECK(bilinear_sample(g, {1, 0})[0] == 2.0f);
    CHECK(bilinear_sample(g, {0, 1})[0] == 3.0f);
    CHECK(bilinear_sample(g, {1, 1})[0] == 4.0f);
  }

  TEST_CASE("bilinear sample at the cell center is the corner mean") {
    GridTensor g(2, 2, 1, std::vector<float>{1, 2, 3, 4});
    CHECK(bilinear_sample(g, {0.5, 0.5})[0] == doctest::Approx(2.5));
  }

  TEST_CASE("bilinear sample matches the tent-kernel oracle") {
    const auto g = oracle::random_grid<float>(4, 4, 3, 11);
    const auto v = bilinear_sample(g, {1.25, 2.75});
    for (int c = 0; c < 3; ++c) {
      CHECK(v[c] == doctest::Approx(oracle::tent_sample(g, {1.25, 2.75}, c)).epsilon(1e-6));
    }
    for (int trial = 0; trial < 50; ++trial) {
      SceneRng rng(100 + trial);
      const Point q{rng.uniform(0, 3), rng.uniform(0, 3)};
      const auto s = bilinear_sample(g, q);
      for (int c = 0; c < 3; ++c) {
        CHECK(s[c] == doctest::Approx(oracle::tent_sample(g, q, c)).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("bilinear sample is exact at every integer coordinate of a random grid") {
    const auto g = oracle::random_grid<float>(5, 7, 2, 3);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 7; ++x) {
        const auto s = bilinear_sample(g, to_point({x, y}));
        CHECK(s[0] == g.at(y, x, 0));
        CHECK(s[1] == g.at(y, x, 1));
      }
    }
  }

  TEST_CASE("bilinear sample is Lipschitz with the neighbour-difference bound") {
    const auto g = oracle::random_grid<double>(6, 6, 1, 5);
    double lip = 0.0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        if (x + 1 < 6) lip = std::max(lip, std::abs(g.at(y, x + 1) - g.at(y, x)));
        if (y + 1 < 6) lip = std::max(lip, std::abs(g.at(y + 1, x) - g.at(y, x)));
      }
    }
    SceneRng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      const Point a{rng.uniform(0, 5), rng.uniform(0, 5)};
      const Point b{std::clamp(a.x + rng.uniform(-0.3, 0.3), 0.0, 5.0),
                    std::clamp(a.y + rng.uniform(-0.3, 0.3), 0.0, 5.0)};
      const double d = std::abs(bilinear_sample(g, a)[0] - bilinear_sample(g, b)[0]);
      CHECK(d <= lip * (std::abs(a.x - b.x) + std::abs(a.y - b.y)) + 1e-12);
    }
  }

  TEST_CASE("bilinear sample rejects out-of-bounds points naming the coordinate") {
    GridTensor g(3, 4, 1);
    CHECK_THROWS_AS(bilinear_sample(g, {-0.01, 1}), BoundsError);
    CHECK_THROWS_AS(bilinear_sample(g, {3.01, 1}), BoundsError);
    CHECK_THROWS_AS(bilinear_sample(g, {1, 2.5}), BoundsError);
    CHECK_NOTHROW(bilinear_sample(g, {3, 2}));
    try {
      bilinear_sample(g, {7.5, 1});
    } catch (const BoundsError& e) {
      CHECK(std::string(e.what()).find("7.5") != std::string::npos);
    }
  }

  TEST_CASE("grid construction enforces its invariants") {
    CHECK_THROWS_AS(GridTensor(0, 3, 1), ShapeError);
    CHECK_THROWS_AS(GridTensor(2, 3, 0), ShapeError);
    CHECK_THROWS_AS(GridTensor(2, 2, 1, std::vector<float>(3)), ShapeError);
    GridTensor g(2, 3, 4);
    CHECK(g.size() == 24);
    g.at(1, 2, 3) = 7;
    CHECK(g.values()[(1 * 3 + 2) * 4 + 3] == 7);
  }

  TEST_CASE("require_finite names the offending entry") {
    GridTensor g(2, 2, 2);
    g.at(1, 0, 1) = std::numeric_limits<float>::quiet_NaN();
    try {
      require_finite(g, "latent");
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()) == "latent has non-finite value at (y=1, x=0, c=1)");
    }
  }

  TEST_CASE("DFT1 encoding follows the documented byte layout") {
    GridTensor g(1, 2, 1, std::vector<float>{1.5f, -2.0f});
    const std::string expect = std::string("DFT1") + le32(1) + le32(2) + le32(1) + f32(1.5f) +
                               f32(-2.0f);
    CHECK(encode_dft(g) == expect);
    CHECK(decode_grid(expect) == g);
  }

  TEST_CASE("DFT1 and NPY round trip") {
    const auto g = oracle::random_grid<float>(5, 3, 4, 21);
    CHECK(decode_grid(encode_dft(g)) == g);
    CHECK(decode_grid(encode_npy(g)) == g);
  }

  TEST_CASE("hand-built NPY files decode") {
    const std::vector<float> v = {0, 1, 2, 3, 4, 5};
    const auto bytes =
        npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3, 1), }", v);
    const GridTensor g = decode_grid(bytes);
    CHECK(g.height() == 2);
    CHECK(g.width() == 3);
    CHECK(g.channels() == 1);
    CHECK(g.at(1, 2) == 5.0f);
  }

  TEST_CASE("unsupported NPY variants are rejected") {
    const std::vector<float> v(6);
    CHECK_THROWS_AS(
        decode_grid(npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3, 1), }", v)),
        DataError);
    CHECK_THROWS_AS(
        decode_grid(npy_bytes("{'descr': '<f4', 'fortran_order': True, 'shape': (2, 3, 1), }", v)),
        DataError);
    CHECK_THROWS_AS(
        decode_grid(npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (6,), }", v)),
        DataError);
  }

  TEST_CASE("malformed DFT1 input is rejected") {
    const auto good = encode_dft(GridTensor(2, 2, 1));
    CHECK_THROWS_AS(decode_grid("XXXX" + good.substr(4)), DataError);
    CHECK_THROWS_AS(decode_grid(good.substr(0, good.size() - 1)), DataError);
    CHECK_THROWS_AS(decode_grid(good + "x"), DataError);
    std::string nan = good;
    const std::string q = f32(std::numeric_limits<float>::quiet_NaN());
    nan.replace(16, 4, q);
    CHECK_THROWS_AS(decode_grid(nan), DataError);
    const std::string huge = std::string("DFT1") + le32(4096) + le32(1) + le32(1);
    CHECK_THROWS_AS(decode_grid(huge), DataError);
  }

  TEST_CASE("files round trip through write_grid and read_grid") {
    const auto dir = std::filesystem::temp_directory_path() / "dragforge-grid-test";
    std::filesystem::create_directories(dir);
    const auto g = oracle::random_grid<float>(3, 3, 2, 4);
    write_grid(dir / "g.dft", g);
    write_grid(dir / "g.npy", g, TensorFormat::npy);
    CHECK(read_grid(dir / "g.dft") == g);
    CHECK(read_grid(dir / "g.npy") == g);
    CHECK_THROWS_AS(read_grid(dir / "missing.dft"), IoError);
    std::filesystem::remove_all(dir);
  }
}

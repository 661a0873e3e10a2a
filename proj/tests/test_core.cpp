#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fieldbench/core/grid.hpp"
#include "fieldbench/core/parallel.hpp"
#include "fieldbench/core/rng.hpp"

using namespace fieldbench;

namespace {
std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("raw2d round-trip is bit exact") {
  GridF g(3, 5);
  Rng rng(42);
  for (auto& v : g.v) v = float(rng.uniform(-2.0, 2.0));
  g.v[7] = 1.0f;
  const auto path = temp_path("fieldbench_roundtrip.uf2d");
  write_raw2d(path, g);
  const GridF back = read_raw2d(path);
  REQUIRE(back.rows == 3);
  REQUIRE(back.cols == 5);
  CHECK(back.v == g.v);
  std::filesystem::remove(path);
}

TEST_CASE("raw2d writes the documented byte layout") {
  GridF g(1, 2);
  g.v = {1.0f, -2.0f};
  const auto path = temp_path("fieldbench_layout.uf2d");
  write_raw2d(path, g);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 12 + 2 * 4);
  CHECK(bytes[0] == 'U');
  CHECK(bytes[1] == 'F');
  CHECK(bytes[2] == '2');
  CHECK(bytes[3] == 'D');
  // height=1, width=2, little endian
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 2);
  // 1.0f = 0x3f800000 LE
  CHECK(bytes[12] == 0x00);
  CHECK(bytes[15] == 0x3f);
  std::filesystem::remove(path);
}

TEST_CASE("raw2d rejects truncated and foreign files") {
  const auto path = temp_path("fieldbench_bad.uf2d");
  {
    std::ofstream out(path, std::ios::binary);
    out << "UF2D";
    out << "xx";
  }
  CHECK_THROWS_AS(read_raw2d(path), Raw2dError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOPE12345678";
  }
  CHECK_THROWS_AS(read_raw2d(path), Raw2dError);
  CHECK_THROWS_AS(read_raw2d(temp_path("fieldbench_missing.uf2d")), Raw2dError);
  std::filesystem::remove(path);
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  bool any_diff = false;
  Rng a2(7);
  for (int i = 0; i < 100; ++i) any_diff |= a2.uniform() != c.uniform();
  CHECK(any_diff);
}

TEST_CASE("rng normal has roughly unit moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("counter rng is order independent") {
  CounterRng rng(99);
  const double a = rng.normal_at(5);
  const double b = rng.normal_at(2);
  CHECK(rng.normal_at(2) == b);
  CHECK(rng.normal_at(5) == a);
  CHECK(a != b);
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { hits[std::size_t(i)] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(
      parallel_for(10, 3, [](int i) { if (i == 7) throw std::runtime_error("boom"); }),
      std::runtime_error);
}

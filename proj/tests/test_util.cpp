#include <sstream>

#include "doctest.h"
#include "surrobench/util.hpp"

using namespace surrobench;

TEST_CASE("derive_seed is order independent and distinct per stream") {
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(7, 4));
  CHECK(derive_seed(7, 3) != derive_seed(8, 3));
}

TEST_CASE("Random streams replay exactly") {
  Random a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("Random::index stays in range and covers it") {
  Random r(1);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = r.index(7);
    REQUIRE(k < 7);
    ++seen[k];
  }
  for (int c : seen) CHECK(c > 800);
}

TEST_CASE("normal draws have unit moments") {
  Random r(3);
  double s = 0, ss = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(ss / n - 1.0) < 0.05);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 3000.0}) {
    CHECK(*parse_double(format_double(v)) == v);
  }
  CHECK_FALSE(parse_double("abc").has_value());
  CHECK_FALSE(parse_double("1.0x").has_value());
  CHECK(*parse_int(" 12 ") == 12);
}

TEST_CASE("CSV splitting honours quotes") {
  const auto f = split_csv_line(R"(a,"b,c","{""x"": 1}",)");
  REQUIRE(f.size() == 4);
  CHECK(f[1] == "b,c");
  CHECK(f[2] == R"({"x": 1})");
  CHECK(f[3].empty());
  CHECK(split_csv_line(csv_field(R"({"x": "a,b"})"))[0] == R"({"x": "a,b"})");
}

TEST_CASE("sha256 of the empty string") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_raw("abc").size() == 32);
}

TEST_CASE("binary writer and reader agree") {
  BinaryWriter w;
  w.u8(9);
  w.u32(0xdeadbeef);
  w.i64(-5);
  w.f64(-0.0);
  w.str("hello");
  BinaryReader r(w.data());
  CHECK(r.u8() == 9);
  CHECK(r.u32() == 0xdeadbeef);
  CHECK(r.i64() == -5);
  CHECK(std::signbit(r.f64()));
  CHECK(r.str() == "hello");
  CHECK(r.at_end());
  CHECK_THROWS_WITH_AS(r.u8(), "truncated binary payload", Error);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
    if (i == 5) throw Error("boom");
  }), Error);
}

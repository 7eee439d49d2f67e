#include <cmath>
#include <set>

#include "doctest.h"
#include "ssd/errors.h"
#include "ssd/rng.h"
#include "ssd/tensor.h"

using namespace ssd;

TEST_CASE("tensor layout is channel-major row-major") {
  Tensor t(Shape{2, 3, 4});
  t.at(1, 2, 3) = 7.0;
  CHECK(t[(1 * 3 + 2) * 4 + 3] == 7.0);
  CHECK(t.plane(1).size() == 12);
  CHECK(t.plane(1)[11] == 7.0);
}

TEST_CASE("tensor arithmetic") {
  Tensor a(Shape{1, 2, 2}, {1, 2, 3, 4});
  Tensor b(Shape{1, 2, 2}, {4, 3, 2, 1});
  CHECK((a + b).vector() == std::vector<double>{5, 5, 5, 5});
  CHECK((a - b).vector() == std::vector<double>{-3, -1, 1, 3});
  CHECK((2.0 * a).vector() == std::vector<double>{2, 4, 6, 8});
  CHECK(a.dot(b) == doctest::Approx(20.0));
  CHECK(a.norm() == doctest::Approx(std::sqrt(30.0)));
  a.axpy(-1.0, b);
  CHECK(a.max_abs() == 3.0);
  CHECK(max_abs_diff(a, Tensor(Shape{1, 2, 2}, {-3, -1, 1, 3})) == 0.0);
}

TEST_CASE("shape mismatches throw") {
  Tensor a(Shape{1, 2, 2});
  Tensor b(Shape{1, 4, 1});
  CHECK_THROWS_AS(a += b, ShapeError);
  CHECK_THROWS_AS(max_abs_diff(a, b), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(require_shape(a.shape(), b.shape(), "x"), ShapeError);
}

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                      {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                      {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  CounterRng a(42, chain_stream(3, 17));
  CounterRng b(42, chain_stream(3, 17));
  CounterRng c(42, chain_stream(3, 18));
  CounterRng d(43, chain_stream(3, 17));
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a(), vb = b(), vc = c(), vd = d();
    CHECK(va == vb);
    differs_c |= va != vc;
    differs_d |= va != vd;
  }
  CHECK(differs_c);
  CHECK(differs_d);
  CHECK(chain_stream(1, 0) != chain_stream(0, 1));
}

TEST_CASE("uniform lies in the open unit interval with the right moments") {
  CounterRng rng(1, 2);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(var - 1.0 / 12.0) < 1e-3);
}

TEST_CASE("normal draws have zero mean, unit variance and zero excess kurtosis") {
  CounterRng rng(9, 0);
  const int n = 400000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 3.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 3.0 * std::sqrt(96.0 / n));
}

TEST_CASE("uniform_int is unbiased (chi-square over 7 bins)") {
  CounterRng rng(5, 5);
  const int n = 70000;
  std::array<int, 7> counts{};
  for (int i = 0; i < n; ++i) {
    const auto v = rng.uniform_int(3, 9);
    REQUIRE(v >= 3);
    REQUIRE(v <= 9);
    ++counts[static_cast<std::size_t>(v - 3)];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  // 6 degrees of freedom, p = 0.01 critical value.
  CHECK(chi2 < 16.81);
}

TEST_CASE("normal_tensor fills the requested shape") {
  CounterRng rng(0, 0);
  const Tensor t = rng.normal_tensor(Shape{3, 4, 5});
  CHECK(t.shape() == Shape{3, 4, 5});
  std::set<double> distinct(t.values().begin(), t.values().end());
  CHECK(distinct.size() == 60);
}

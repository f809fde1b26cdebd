#include <doctest.h>

#include <random>
#include <vector>

#include "pumpshape/kernels.hpp"

using namespace pumpshape;
using kernels::cplx;

namespace {

std::vector<double> reals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::vector<cplx> complexes(std::size_t n, std::uint64_t seed) {
  auto re = reals(n, seed), im = reals(n, seed + 1);
  std::vector<cplx> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = {re[i], im[i]};
  return v;
}

const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 33, 1001};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table matches plain loops") {
    const auto& s = kernels::scalar_table();
    auto a = reals(37, 1), b = reals(37, 2);
    double dot = 0, ssd = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      ssd += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(s.dot(a, b) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(s.sum_sq_diff(a, b) == doctest::Approx(ssd).epsilon(1e-14));
    auto z = complexes(5, 3), w = complexes(5, 5);
    auto zc = z;
    s.cmul(zc, w);
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(std::abs(zc[i] - z[i] * w[i]) < 1e-15);
    }
  }

  TEST_CASE("avx2 elementwise kernels are bit-identical to scalar") {
    const auto* v = kernels::avx2_table();
    if (!v) {
      MESSAGE("AVX2 unavailable; equivalence not exercised");
      return;
    }
    const auto& s = kernels::scalar_table();
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      auto z = complexes(n, 10 + n), w = complexes(n, 20 + n);
      auto r = reals(n, 30 + n);
      std::vector<double> o1(n), o2(n);
      s.abs2(z, o1);
      v->abs2(z, o2);
      CHECK(o1 == o2);
      auto z1 = z, z2 = z;
      s.scale_by_real(z1, r);
      v->scale_by_real(z2, r);
      CHECK(z1 == z2);
      z1 = z;
      z2 = z;
      s.cmul(z1, w);
      v->cmul(z2, w);
      CHECK(z1 == z2);
    }
  }

  TEST_CASE("avx2 reductions agree with scalar to rounding") {
    const auto* v = kernels::avx2_table();
    if (!v) return;
    const auto& s = kernels::scalar_table();
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      auto a = reals(n, 40 + n), b = reals(n, 50 + n);
      auto za = complexes(n, 60 + n), zb = complexes(n, 70 + n);
      const double scale = static_cast<double>(n) + 1.0;
      CHECK(std::abs(s.dot(a, b) - v->dot(a, b)) <= 1e-13 * scale);
      CHECK(std::abs(s.sum_sq_diff(a, b) - v->sum_sq_diff(a, b)) <= 1e-13 * scale);
      CHECK(std::abs(s.cdot(za, zb) - v->cdot(za, zb)) <= 1e-13 * scale);
    }
  }

  TEST_CASE("selection can be switched and restored") {
    const auto original = kernels::active().isa;
    CHECK(kernels::select(kernels::Isa::scalar));
    CHECK(kernels::active().isa == kernels::Isa::scalar);
    if (kernels::avx2_table()) {
      CHECK(kernels::select(kernels::Isa::avx2));
      CHECK(kernels::active().isa == kernels::Isa::avx2);
    } else {
      CHECK_FALSE(kernels::select(kernels::Isa::avx2));
    }
    kernels::select(original);
    CHECK(kernels::isa_name(kernels::Isa::scalar) == "scalar");
  }
}

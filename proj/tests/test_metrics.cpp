#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pumpshape/metrics.hpp"
#include "pumpshape/spdc_model.hpp"

using namespace pumpshape;

namespace {

Grid<double> gaussian_spot(std::size_t n, double w) {
  Grid<double> g(n);
  const double c = static_cast<double>(n / 2);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < n; ++k) {
      const double dr = static_cast<double>(r) - c, dc = static_cast<double>(k) - c;
      g(r, k) = std::exp(-2.0 * (dr * dr + dc * dc) / (w * w));
    }
  return g;
}

Grid<double> random_grid(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid<double> g(n);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

TurbulenceParams lab() {
  TurbulenceParams p;
  p.outer_scale = 10e-3;
  p.inner_scale = 5e-6;
  p.scale_down = 1000.0;
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("target mask of a single pixel") {
    Grid<double> g(8, 0.0);
    g(2, 5) = 3.0;
    const auto m = target_mask(g);
    CHECK(m.count() == 1);
    CHECK(m.mask(2, 5) == 1);
    CHECK_THROWS_AS(target_mask(Grid<double>(8, 0.0)), DomainError);
  }

  TEST_CASE("target mask of a Gaussian is the quarter-peak disc") {
    const double w = 20.0;
    const auto m = target_mask(gaussian_spot(128, w));
    const double radius = w * std::sqrt(std::log(4.0) / 2.0);
    CHECK(static_cast<double>(m.count()) == doctest::Approx(std::numbers::pi * radius * radius).epsilon(0.03));
    CHECK(m.mask(64, 64 + 16) == 1);  // r = 16 < 16.65
    CHECK(m.mask(64, 64 + 17) == 0);
  }

  TEST_CASE("target mask is scale invariant") {
    auto g = random_grid(32, 1);
    const auto a = target_mask(g);
    for (auto& v : g.values()) v *= 7.5;
    CHECK(target_mask(g).mask == a.mask);
  }

  TEST_CASE("enhancement and efficiency") {
    const Grid<double> flat(16, 2.0);
    const auto mask = target_mask(gaussian_spot(16, 3.0));
    CHECK(enhancement(flat, flat, mask) == doctest::Approx(1.0));
    const auto spot = gaussian_spot(16, 3.0);
    CHECK(efficiency(spot, spot, mask) == doctest::Approx(1.0));
    auto before = random_grid(16, 2), after = random_grid(16, 3);
    const double eta = enhancement(before, after, mask);
    const double eff = efficiency(after, spot, mask);
    for (auto& v : before.values()) v *= 3.0;
    for (auto& v : after.values()) v *= 3.0;
    auto spot3 = spot;
    for (auto& v : spot3.values()) v *= 3.0;
    CHECK(enhancement(before, after, mask) == doctest::Approx(eta));
    CHECK(efficiency(after, spot3, mask) == doctest::Approx(eff));
    CHECK_THROWS_AS(enhancement(Grid<double>(16, 0.0), after, mask), DomainError);
    CHECK_THROWS_AS(efficiency(after, Grid<double>(16, 0.0), mask), DomainError);
    CHECK_THROWS_AS(enhancement(Grid<double>(8, 1.0), after, mask), ShapeError);
  }

  TEST_CASE("dynamic enhancement") {
    const std::vector<double> during{4, 6}, frozen{1, 1, 1};
    CHECK(dynamic_enhancement(during, frozen) == doctest::Approx(5.0));
    CHECK_THROWS_AS(dynamic_enhancement(during, std::vector<double>{0.0}), DomainError);
  }

  TEST_CASE("pearson properties") {
    const auto a = random_grid(32, 4), b = random_grid(32, 5);
    CHECK(pearson(a, a) == doctest::Approx(1.0));
    auto neg = a;
    for (auto& v : neg.values()) v = 3.0 - 2.0 * v;
    CHECK(pearson(a, neg) == doctest::Approx(-1.0));
    CHECK(pearson(a, b) == doctest::Approx(pearson(b, a)).epsilon(1e-14));
    auto aff = b;
    for (auto& v : aff.values()) v = 4.0 * v + 11.0;
    CHECK(pearson(a, aff) == doctest::Approx(pearson(a, b)).epsilon(1e-12));
    CHECK_THROWS_AS(pearson(a, Grid<double>(32, 1.0)), DomainError);
  }

  TEST_CASE("independent speckles are uncorrelated") {
    // Strong scattering (r0 about 3 samples) spreads the halo well beyond the
    // central 48 x 48 pixels, so the envelope is nearly flat there.
    auto strong = lab();
    strong.scale_down = 4000.0;
    const auto pump = gaussian_beam(1.0e-3, 256, 12.5e-6, 404e-9);
    const auto a = far_field(apply_phase(pump, generate_screen(strong, 256, 12.5e-6, 1), 1.0), 0.3);
    const auto b = far_field(apply_phase(pump, generate_screen(strong, 256, 12.5e-6, 2), 1.0), 0.3);
    std::vector<double> va, vb;
    for (std::size_t r = 104; r < 152; ++r)
      for (std::size_t c = 104; c < 152; ++c) {
        va.push_back(a.intensity(r, c));
        vb.push_back(b.intensity(r, c));
      }
    CHECK(std::abs(pearson(va, vb)) < 0.1);
  }

  TEST_CASE("structure function estimator") {
    std::vector<PhaseScreen> flat{flat_screen(32, 1e-4, 1.0), flat_screen(32, 1e-4, -2.0)};
    const std::vector<std::size_t> lags{1, 3, 7};
    for (const auto& p : structure_function(flat, lags)) CHECK(p.value == 0.0);

    // A linear ramp phi = a x has D(r) = (a r)^2 along rows and 0 along columns.
    PhaseScreen ramp = flat_screen(16, 0.5);
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c) ramp.phase(r, c) = 0.3 * static_cast<double>(c);
    std::vector<PhaseScreen> one{ramp, ramp};
    const auto pts = structure_function(one, lags);
    CHECK(pts[1].along_rows == doctest::Approx(0.81));
    CHECK(pts[1].along_cols == 0.0);
    CHECK(pts[1].separation == doctest::Approx(1.5));
    CHECK(pts[1].value == doctest::Approx(0.405));
  }

  TEST_CASE("structure function is increasing on the inertial band") {
    const auto p = lab();
    std::vector<PhaseScreen> screens;
    for (std::uint64_t s = 0; s < 20; ++s) screens.push_back(generate_screen(p, 256, p.r0() / 20.0, s));
    const std::vector<std::size_t> lags{4, 8, 16, 32};
    const auto pts = structure_function(screens, lags);
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].value > pts[i - 1].value);
  }
}

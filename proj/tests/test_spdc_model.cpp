#include <doctest.h>

#include <cmath>

#include "pumpshape/metrics.hpp"
#include "pumpshape/spdc_model.hpp"

using namespace pumpshape;

namespace {

const std::size_t kN = 128;
const double kDx = 25e-6;

TurbulenceParams lab() {
  TurbulenceParams p;
  p.outer_scale = 10e-3;
  p.inner_scale = 5e-6;
  p.scale_down = 1000.0;
  return p;
}

ComplexField pump() { return gaussian_beam(0.7e-3, kN, kDx, 404e-9); }

double centroid_x(const FarFieldMap& m) {
  double s = 0, sx = 0;
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m.size(); ++c) {
      s += m.intensity(r, c);
      sx += m.intensity(r, c) * m.x(c);
    }
  return sx / s;
}

}  // namespace

TEST_SUITE("spdc_model") {
  TEST_CASE("config validation") {
    SpdcConfig c;
    CHECK_NOTHROW(c.validate());
    c.pair_wavelength = 800e-9;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = {};
    c.beta = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.beta = 1.3;
    CHECK_THROWS_AS(c.validate(), DomainError);
  }

  TEST_CASE("beta = 1 with zero control equals the pump after the screen") {
    const auto atm = generate_screen(lab(), kN, kDx, 3);
    const auto eff = effective_pair_field(pump(), flat_screen(kN, kDx), atm, 1.0);
    CHECK(eff.amplitude == apply_phase(pump(), atm, 1.0).amplitude);
  }

  TEST_CASE("phase linearity in beta") {
    const auto atm = generate_screen(lab(), kN, kDx, 4);
    const auto two = apply_phase(apply_phase(pump(), atm, 0.3), atm, 0.4);
    const auto one = effective_pair_field(pump(), flat_screen(kN, kDx), atm, 0.7);
    for (std::size_t i = 0; i < two.amplitude.count(); ++i) CHECK(std::abs(two.amplitude[i] - one.amplitude[i]) < 1e-12);
  }

  TEST_CASE("control = -beta atmosphere cancels the screen") {
    const double beta = 0.7;
    const auto atm = generate_screen(lab(), kN, kDx, 5);
    PhaseScreen control = flat_screen(kN, kDx);
    for (std::size_t i = 0; i < atm.phase.count(); ++i) control.phase[i] = -beta * wrap_phase(atm.phase[i]);
    const auto eff = effective_pair_field(pump(), control, atm, beta);
    SpdcConfig cfg;
    const auto a = coincidence_pattern(eff, 0.3, cfg, 2);
    const auto b = coincidence_pattern(pump(), 0.3, cfg, 2);
    for (std::size_t i = 0; i < a.intensity.count(); ++i) CHECK(std::abs(a.intensity[i] - b.intensity[i]) < 1e-9 * b.total());
  }

  TEST_CASE("coincidence pitch is twice the pump pitch and the spot sits at -idler") {
    SpdcConfig cfg;
    cfg.idler_x = 150e-6;
    const auto p = far_field(pump(), 0.3, 2);
    const auto c = coincidence_pattern(pump(), 0.3, cfg, 2);
    CHECK(c.pitch == 2.0 * p.pitch);
    CHECK(c.wavelength == cfg.pair_wavelength);
    CHECK(centroid_x(c) == doctest::Approx(-150e-6).epsilon(1e-6));
    cfg.idler_x = 1.0;
    CHECK_THROWS_AS(coincidence_pattern(pump(), 0.3, cfg, 2), RangeError);
  }

  TEST_CASE("normalisation is independent of the phases") {
    SpdcConfig cfg;
    const double ref = coincidence_pattern(pump(), 0.3, cfg, 2).total();
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto atm = generate_screen(lab(), kN, kDx, 10 + s);
      const auto eff = effective_pair_field(pump(), generate_screen(lab(), kN, kDx, 20 + s), atm, 0.7);
      CHECK(coincidence_pattern(eff, 0.3, cfg, 2).total() == doctest::Approx(ref).epsilon(1e-9));
    }
  }

  TEST_CASE("beta = 1 coincidence speckle equals the rescaled pump speckle") {
    SpdcConfig cfg;
    const auto atm = generate_screen(lab(), kN, kDx, 6);
    const auto flat = flat_screen(kN, kDx);
    const auto p = far_field(apply_phase(pump(), atm, 1.0), 0.3, 2);
    const auto c = coincidence_pattern(effective_pair_field(pump(), flat, atm, 1.0), 0.3, cfg, 2);
    const auto pr = rescale_pattern(p, 2.0);
    const auto cr = resample_pattern(c, p.size(), p.pitch, c.center_x, c.center_y);
    double se = 0, ss = 0;
    for (std::size_t i = 0; i < pr.intensity.count(); ++i) {
      se += std::pow(pr.intensity[i] - cr.intensity[i], 2);
      ss += cr.intensity[i] * cr.intensity[i];
    }
    CHECK(std::sqrt(se / ss) < 0.02);
    CHECK(pearson(pr.intensity, cr.intensity) > 0.95);
  }

  TEST_CASE("singles envelope") {
    SpdcConfig cfg;
    const auto a = singles_envelope(cfg, 1.0, 99, 25e-6, 0, 0);
    const auto b = singles_envelope(cfg, 0.8, 99, 25e-6, 0, 0);
    for (std::size_t i = 0; i < a.intensity.count(); ++i) CHECK(b.intensity[i] == doctest::Approx(0.8 * a.intensity[i]));
    CHECK(a.intensity(49, 49) == cfg.singles_peak_rate);
    // Along the scan axes the default envelope spans the measured 4500-6500 counts/s.
    double lo = 1e9, hi = 0;
    for (std::size_t c = 0; c < 99; ++c) {
      lo = std::min(lo, a.intensity(49, c));
      hi = std::max(hi, a.intensity(49, c));
    }
    CHECK(lo == doctest::Approx(4500).epsilon(0.01));
    CHECK(hi == 6500);
    const auto after = singles_envelope(cfg, 0.82, 99, 25e-6, 0, 0);
    CHECK(0.82 * lo == doctest::Approx(3700).epsilon(0.01));
    CHECK(after.intensity(49, 49) == doctest::Approx(5300).epsilon(0.01));
    CHECK_THROWS_AS(singles_envelope(cfg, 0.0, 9, 1e-5, 0, 0), DomainError);
    CHECK_THROWS_AS(singles_envelope(cfg, 1.1, 9, 1e-5, 0, 0), DomainError);
  }
}

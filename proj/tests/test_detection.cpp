#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "pumpshape/detection.hpp"
#include "pumpshape/metrics.hpp"
#include "pumpshape/spdc_model.hpp"

using namespace pumpshape;

namespace {

FarFieldMap uniform_pattern(std::size_t n, double pitch, double value) {
  FarFieldMap m;
  m.intensity = Grid<double>(n, value);
  m.pitch = pitch;
  return m;
}

DetectionConfig small_scan(std::size_t points) {
  DetectionConfig cfg;
  cfg.scan.points = points;
  cfg.scan.step = 25e-6;
  return cfg;
}

struct Moments {
  double mean, var;
};

Moments moments(const Grid<double>& g) {
  const double n = static_cast<double>(g.count());
  const double mean = std::accumulate(g.values().begin(), g.values().end(), 0.0) / n;
  double var = 0.0;
  for (double v : g.values()) var += (v - mean) * (v - mean);
  return {mean, var / (n - 1.0)};
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("accidental-only scans are Poisson and subtraction is unbiased") {
    const auto pattern = uniform_pattern(256, 20e-6, 0.0);
    auto cfg = small_scan(40);  // 1600 points
    cfg.exposure_per_point = 10.0;
    const auto raw = scan_coincidences(pattern, cfg);
    const auto m = moments(raw.counts);
    CHECK(m.mean == doctest::Approx(1.4).epsilon(0.1));
    CHECK(m.var / m.mean >= 0.8);
    CHECK(m.var / m.mean <= 1.2);
    for (double v : raw.counts.values()) CHECK(v == std::floor(v));
    const auto corrected = subtract_accidentals(raw, cfg);
    CHECK(corrected.accidental_corrected);
    const auto c = moments(corrected.counts);
    CHECK(std::abs(c.mean) < 3.0 * std::sqrt(c.var / 1600.0));
    for (std::size_t i = 0; i < raw.counts.count(); ++i) {
      CHECK(corrected.counts[i] - corrected.counts[0] == doctest::Approx(raw.counts[i] - raw.counts[0]));
    }
    CHECK_THROWS_AS(subtract_accidentals(corrected, cfg), StateError);
  }

  TEST_CASE("zero exposure gives zero counts") {
    auto cfg = small_scan(10);
    cfg.exposure_per_point = 0.0;
    const auto raw = scan_coincidences(uniform_pattern(256, 20e-6, 1.0), cfg);
    for (double v : raw.counts.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(raw.rates(), DomainError);
  }

  TEST_CASE("doubling exposure doubles the mean") {
    auto pattern = uniform_pattern(256, 20e-6, 0.0);
    auto cfg = small_scan(40);
    cfg.exposure_per_point = 5.0;
    const auto a = moments(scan_coincidences(pattern, cfg).counts);
    cfg.exposure_per_point = 10.0;
    cfg.seed = 2;
    const auto b = moments(scan_coincidences(pattern, cfg).counts);
    const double se = std::sqrt(b.var / 1600.0 + 4.0 * a.var / 1600.0);
    CHECK(std::abs(b.mean - 2.0 * a.mean) < 3.0 * se);
  }

  TEST_CASE("scans are deterministic in the seed") {
    const auto pattern = uniform_pattern(256, 20e-6, 0.0);
    auto cfg = small_scan(20);
    CHECK(scan_coincidences(pattern, cfg).counts == scan_coincidences(pattern, cfg).counts);
    auto other = cfg;
    other.seed = 99;
    CHECK_FALSE(scan_coincidences(pattern, cfg).counts == scan_coincidences(pattern, other).counts);
  }

  TEST_CASE("collection aperture integrates the pattern density") {
    const double pitch = 20e-6, value = 3.0;
    const auto pattern = uniform_pattern(256, pitch, value);
    auto cfg = small_scan(5);
    const double r = cfg.collection_diameter / 2.0;
    const auto rates = expected_scan_rates(pattern, cfg);
    const double area = std::numbers::pi * r * r / (pitch * pitch);
    for (double v : rates.values()) CHECK(v == doctest::Approx(value * area).epsilon(0.03));
  }

  TEST_CASE("larger apertures never collect less") {
    SpdcConfig sc;
    const auto pump = gaussian_beam(0.7e-3, 128, 25e-6, 404e-9);
    TurbulenceParams tp;
    tp.outer_scale = 10e-3;
    tp.inner_scale = 5e-6;
    tp.scale_down = 1000.0;
    const auto eff = apply_phase(pump, generate_screen(tp, 128, 25e-6, 1), 1.0);
    const auto pattern = coincidence_pattern(eff, 0.3, sc, 2);
    auto cfg = small_scan(15);
    cfg.collection_diameter = 30e-6;
    const auto a = expected_scan_rates(pattern, cfg);
    cfg.collection_diameter = 60e-6;
    const auto b = expected_scan_rates(pattern, cfg);
    for (std::size_t i = 0; i < a.count(); ++i) CHECK(b[i] >= a[i]);
  }

  TEST_CASE("scan outside the pattern is a range error") {
    auto cfg = small_scan(99);
    CHECK_THROWS_AS(scan_coincidences(uniform_pattern(32, 20e-6, 0.0), cfg), RangeError);
  }

  TEST_CASE("camera noiseless path and exposure linearity") {
    const auto pump = gaussian_beam(1.4e-3, 512, 12.5e-6, 404e-9);
    const auto pattern = far_field(pump, 0.3, 2);
    DetectionConfig cfg;
    cfg.camera_shot_noise = false;
    cfg.camera_pixels = 64;
    const auto obs = camera_observation(pattern, cfg.camera_pixel, cfg.camera_pixels);
    const auto binned = obs.apply(pattern.intensity);
    const auto frame = camera_capture(pattern, cfg);
    for (std::size_t i = 0; i < binned.count(); ++i) CHECK(frame.counts[i] == doctest::Approx(binned[i] * cfg.camera_exposure));
    cfg.camera_exposure *= 3.0;
    const auto longer = camera_capture(pattern, cfg);
    const double s1 = std::accumulate(frame.counts.values().begin(), frame.counts.values().end(), 0.0);
    const double s3 = std::accumulate(longer.counts.values().begin(), longer.counts.values().end(), 0.0);
    CHECK(s3 == doctest::Approx(3.0 * s1));
    // Pixel integration conserves power over the covered area.
    const double covered = std::accumulate(binned.values().begin(), binned.values().end(), 0.0);
    CHECK(covered == doctest::Approx(pattern.total()).epsilon(0.01));
  }

  TEST_CASE("pump speckle grain spans about a hundred camera pixels") {
    const double w = 1.4e-3, lambda = 404e-9, f = 0.3;
    const auto pattern = far_field(gaussian_beam(w, 512, 12.5e-6, lambda), f, 2);
    DetectionConfig cfg;
    cfg.camera_shot_noise = false;
    const auto frame = camera_capture(pattern, cfg);
    const double peak = *std::max_element(frame.counts.values().begin(), frame.counts.values().end());
    const auto n = std::count_if(frame.counts.values().begin(), frame.counts.values().end(),
                                 [&](double v) { return v >= peak * std::exp(-2.0); });
    const double grain = lambda * f / (std::numbers::pi * w);
    const double expected = std::numbers::pi * grain * grain / (cfg.camera_pixel * cfg.camera_pixel);
    CHECK(expected == doctest::Approx(100).epsilon(0.1));
    CHECK(static_cast<double>(n) == doctest::Approx(expected).epsilon(0.15));
  }

  TEST_CASE("shot-noise camera frames are integral and seeded") {
    const auto pattern = far_field(gaussian_beam(1.4e-3, 256, 25e-6, 404e-9), 0.3, 2);
    DetectionConfig cfg;
    cfg.camera_pixels = 32;
    cfg.camera_gain = 1e7;
    const auto a = camera_capture(pattern, cfg);
    CHECK(a.counts == camera_capture(pattern, cfg).counts);
    for (double v : a.counts.values()) CHECK(v == std::floor(v));
  }

  TEST_CASE("speckle contrast survives counting and correction") {
    SpdcConfig sc;
    TurbulenceParams tp;
    tp.outer_scale = 10e-3;
    tp.inner_scale = 5e-6;
    tp.scale_down = 1000.0;
    const auto eff = apply_phase(gaussian_beam(1.4e-3, 512, 12.5e-6, 404e-9), generate_screen(tp, 512, 12.5e-6, 8), 1.0);
    auto cfg = small_scan(61);
    cfg.exposure_per_point = 30.0;
    auto pattern = coincidence_pattern(eff, 0.3, sc, 2);
    // Speckle at about one coincidence per second per scan point.
    const auto base = expected_scan_rates(pattern, cfg);
    pattern = scaled(pattern, 1.0 / moments(base).mean);
    const auto rates = expected_scan_rates(pattern, cfg);
    const auto er = moments(rates);
    const double contrast = std::sqrt(er.var) / er.mean;
    // Shot noise adds the mean count to the count variance.
    const auto counts = moments(scan_coincidences(pattern, cfg).counts);
    const double t = cfg.exposure_per_point;
    const double bg = cfg.accidental_rate * t;
    const double measured = std::sqrt(counts.var - counts.mean) / (counts.mean - bg);
    CHECK(measured == doctest::Approx(contrast).epsilon(0.05));
  }

  TEST_CASE("rate calibration") {
    const auto pattern = far_field(gaussian_beam(1.4e-3, 512, 12.5e-6, 404e-9), 0.3, 2);
    auto cfg = small_scan(21);
    const double k = rate_scale(pattern, cfg, 5.0);
    const auto rates = expected_scan_rates(scaled(pattern, k), cfg);
    CHECK(*std::max_element(rates.values().begin(), rates.values().end()) == doctest::Approx(5.0));
    CHECK_THROWS_AS(rate_scale(uniform_pattern(512, 9.5e-6, 0.0), cfg, 5.0), DomainError);
  }

  TEST_CASE("observation collapse sums masked rows") {
    const auto pattern = far_field(gaussian_beam(1.4e-3, 256, 25e-6, 404e-9), 0.3, 2);
    auto cfg = small_scan(9);
    const auto obs = scan_observation(pattern, cfg.scan, cfg.collection_diameter);
    Grid<std::uint8_t> mask(9, 0);
    mask(4, 4) = mask(4, 5) = mask(0, 0) = 1;
    double direct = 0;
    const auto values = obs.apply(pattern.intensity);
    direct = values(4, 4) + values(4, 5) + values(0, 0);
    double collapsed = 0;
    for (const auto& [i, w] : obs.collapse(mask)) collapsed += w * pattern.intensity[i];
    CHECK(collapsed == doctest::Approx(direct).epsilon(1e-12));
  }

  TEST_CASE("derived seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 4; ++s)
      for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(s, i));
    CHECK(seen.size() == 4000);
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  }

  TEST_CASE("config validation") {
    DetectionConfig cfg;
    cfg.collection_diameter = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.exposure_per_point = -1;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
  }
}

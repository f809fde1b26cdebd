#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pumpshape/detection.hpp"
#include "pumpshape/metrics.hpp"
#include "pumpshape/shaper.hpp"

using namespace pumpshape;

namespace {

constexpr double kPi = std::numbers::pi;

TurbulenceParams lab() {
  TurbulenceParams p;
  p.outer_scale = 10e-3;
  p.inner_scale = 5e-6;
  p.scale_down = 1000.0;
  return p;
}

// Small bench: 128 grid, 25 um pitch, 1.4 mm beam.
struct Small {
  std::size_t n = 128;
  double dx = 25e-6;
  std::size_t pad = 2;
  ComplexField pump = gaussian_beam(0.7e-3, 128, 25e-6, 404e-9);
  FarFieldMap ref = far_field(pump, 0.3, 2);
  Observation camera = camera_observation(ref, 4.8e-6, 64);
  TargetMask mask = target_mask(camera.apply(ref.intensity));
};

double pipeline_signal(const Small& b, const ComplexField& incident, const ControlState& state) {
  const auto out = far_field(apply_phase(incident, state.render(b.dx), 1.0), 0.3, b.pad);
  return masked_sum(b.camera.apply(out.intensity), b.mask);
}

}  // namespace

TEST_SUITE("shaper") {
  TEST_CASE("tiling layout") {
    const auto t = make_tiling(64, 4, 40);
    CHECK(t.origin == 12);
    CHECK(t.index[0] == -1);
    CHECK(t.index[12 * 64 + 12] == 0);
    CHECK(t.index[(12 + 39) * 64 + 12 + 39] == 15);
    CHECK(t.index[(12 + 10) * 64 + 12 + 10] == 5);
    std::vector<int> counts(16, 0);
    for (auto v : t.index)
      if (v >= 0) ++counts[static_cast<std::size_t>(v)];
    for (int c : counts) CHECK(c == 100);
    CHECK_THROWS_AS(make_tiling(64, 4, 3), ConfigError);
    CHECK_THROWS_AS(make_tiling(64, 4, 65), ConfigError);
    CHECK(make_tiling_for_beam(512, 30, 12.5e-6, 1.4e-3).aperture == 336);
  }

  TEST_CASE("first-harmonic fit recovers the optimum phase") {
    const double a = 3.0, b = 1.7, opt = kPi / 3.0;
    std::vector<double> v;
    for (int j = 0; j < 5; ++j) v.push_back(a + b * std::cos(2 * kPi * j / 5.0 - opt));
    const auto fit = fit_first_harmonic(v);
    CHECK(std::abs(fit.phase - opt) < 1e-9);
    CHECK(fit.offset == doctest::Approx(a));
    CHECK(fit.amplitude == doctest::Approx(b));
    CHECK_FALSE(fit.degenerate);
    // Dense brute-force maximiser of the fitted sinusoid.
    double best = -1e300, arg = 0;
    for (int i = 0; i < 2000000; ++i) {
      const double t = 2 * kPi * i / 2000000.0;
      const double val = fit.offset + fit.amplitude * std::cos(t - fit.phase);
      if (val > best) {
        best = val;
        arg = t;
      }
    }
    CHECK(std::abs(arg - opt) < 4e-6);
  }

  TEST_CASE("degenerate fits") {
    CHECK(fit_first_harmonic(std::vector<double>{2, 2, 2, 2, 2}).degenerate);
    CHECK(fit_first_harmonic(std::vector<double>{0, 0, 0}).degenerate);
    CHECK_THROWS_AS(fit_first_harmonic(std::vector<double>{1, 2}), DomainError);
  }

  TEST_CASE("degenerate response leaves phases untouched") {
    auto state = ControlState::flat(make_tiling(16, 2, 16));
    FunctionFeedback fb([](std::span<const double>) { return 0.0; }, true);
    std::mt19937_64 rng(1);
    partition_iteration(state, fb, 5, rng);
    for (double p : state.phases) CHECK(p == 0.0);
    CHECK(state.iterations == 1);
  }

  TEST_CASE("single segment aligns with the constant background") {
    const std::complex<double> c = std::polar(2.0, 0.9), t = std::polar(0.5, -0.4);
    auto state = ControlState::flat(make_tiling(8, 1, 8));
    FunctionFeedback fb([&](std::span<const double> ph) { return std::norm(c + t * std::polar(1.0, ph[0])); }, true);
    std::mt19937_64 rng(3);
    partition_iteration(state, fb, 5, rng);
    CHECK(std::remainder(state.phases[0] - (std::arg(c) - std::arg(t)), 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("negative noiseless feedback is rejected") {
    auto state = ControlState::flat(make_tiling(8, 2, 8));
    FunctionFeedback fb([](std::span<const double>) { return -1.0; }, true);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(partition_iteration(state, fb, 5, rng), DomainError);
  }

  TEST_CASE("transfer feedback matches the full optical pipeline") {
    const Small b;
    const auto incident = apply_phase(b.pump, generate_screen(lab(), b.n, b.dx, 2), 1.0);
    const auto tiling = make_tiling_for_beam(b.n, 8, b.dx, 0.7e-3);
    TransferFeedback fb(tiling, b.pad, b.camera.collapse(b.mask.mask), NoiseModel{});
    fb.bind(incident);
    auto state = ControlState::flat(tiling);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-4.0, 9.0);
    for (int trial = 0; trial < 3; ++trial) {
      for (auto& p : state.phases) p = u(rng);
      const double direct = pipeline_signal(b, incident, state);
      CHECK(std::abs(fb.expected(state.phases) - direct) < 1e-9 * direct);
    }
  }

  TEST_CASE("probe batches agree with single measurements") {
    const Small b;
    const auto tiling = make_tiling_for_beam(b.n, 6, b.dx, 0.7e-3);
    TransferFeedback fb(tiling, b.pad, b.camera.collapse(b.mask.mask), NoiseModel{});
    fb.bind(apply_phase(b.pump, generate_screen(lab(), b.n, b.dx, 3), 1.0));
    std::vector<double> phases(36);
    for (std::size_t i = 0; i < 36; ++i) phases[i] = 0.1 * static_cast<double>(i);
    const std::vector<std::size_t> sel{1, 4, 9, 20, 35};
    const std::vector<double> offs{0.0, 1.0, 2.5};
    const auto batch = fb.measure_probes(phases, sel, offs);
    for (std::size_t j = 0; j < offs.size(); ++j) {
      auto p = phases;
      for (auto s : sel) p[s] += offs[j];
      CHECK(batch[j] == doctest::Approx(fb.expected(p)).epsilon(1e-12));
    }
  }

  TEST_CASE("global phase gauge with a fully segmented grid") {
    const Small b;
    const auto tiling = make_tiling(b.n, 8, b.n);
    TransferFeedback fb(tiling, b.pad, b.camera.collapse(b.mask.mask), NoiseModel{});
    fb.bind(apply_phase(b.pump, generate_screen(lab(), b.n, b.dx, 4), 1.0));
    std::vector<double> phases(64);
    for (std::size_t i = 0; i < 64; ++i) phases[i] = std::sin(static_cast<double>(i));
    const double base = fb.expected(phases);
    for (double k : {0.3, 2.0, -5.0}) {
      auto shifted = phases;
      for (auto& p : shifted) p += k;
      CHECK(fb.expected(shifted) == doctest::Approx(base).epsilon(1e-12));
    }
  }

  TEST_CASE("noiseless optimisation never loses signal and fills the trace") {
    const Small b;
    const auto tiling = make_tiling_for_beam(b.n, 8, b.dx, 0.7e-3);
    TransferFeedback fb(tiling, b.pad, b.camera.collapse(b.mask.mask), NoiseModel{});
    fb.bind(apply_phase(b.pump, generate_screen(lab(), b.n, b.dx, 5), 1.0));
    auto state = ControlState::flat(tiling);
    std::mt19937_64 rng(6);
    double prev = fb.expected(state.phases);
    const double start = prev;
    for (int i = 0; i < 60; ++i) {
      partition_iteration(state, fb, 5, rng);
      const double now = fb.expected(state.phases);
      CHECK(now >= prev * (1.0 - 1e-12));
      prev = now;
    }
    CHECK(prev > 3.0 * start);
    CHECK(state.trace.size() == 300);
    for (std::size_t i = 0; i < state.trace.size(); ++i) {
      CHECK(state.trace[i].measurement == i);
      CHECK(state.trace[i].iteration == i / 5);
    }
  }

  TEST_CASE("unscattered beam stays at its optimum") {
    const Small b;
    const auto tiling = make_tiling_for_beam(b.n, 8, b.dx, 0.7e-3);
    TransferFeedback fb(tiling, b.pad, b.camera.collapse(b.mask.mask), NoiseModel{});
    fb.bind(b.pump);
    auto state = ControlState::flat(tiling);
    const double start = fb.expected(state.phases);
    std::mt19937_64 rng(7);
    OptimizationOptions opts;
    opts.budget = 200;
    run_optimization(state, fb, opts, rng);
    CHECK(fb.expected(state.phases) / start >= 0.99);
  }

  TEST_CASE("budget and target stopping") {
    auto state = ControlState::flat(make_tiling(8, 2, 8));
    std::size_t calls = 0;
    FunctionFeedback fb([&](std::span<const double> ph) {
      ++calls;
      return 2.0 + std::cos(ph[0]) + std::cos(ph[1] - 1.0);
    }, true);
    std::mt19937_64 rng(1);
    OptimizationOptions opts;
    opts.budget = 103;
    opts.n_phases = 5;
    run_optimization(state, fb, opts, rng);
    CHECK(state.iterations == 20);
    CHECK(state.trace.size() == 100);
    CHECK(calls == 100);

    auto s2 = ControlState::flat(make_tiling(8, 2, 8));
    opts.budget = 1000;
    opts.target_enhancement = 1.5;
    opts.baseline = 2.0;
    run_optimization(s2, fb, opts, rng);
    CHECK(s2.trace.size() < 1000);
  }

  TEST_CASE("Poisson feedback is seeded") {
    const Small b;
    const auto tiling = make_tiling_for_beam(b.n, 4, b.dx, 0.7e-3);
    NoiseModel noise{true, 1e6, 2.0, 9};
    TransferFeedback a(tiling, b.pad, b.camera.collapse(b.mask.mask), noise);
    TransferFeedback c(tiling, b.pad, b.camera.collapse(b.mask.mask), noise);
    a.bind(b.pump);
    c.bind(b.pump);
    std::vector<double> ph(16, 0.0);
    CHECK_FALSE(a.noiseless());
    for (int i = 0; i < 5; ++i) {
      const double v = a.measure(ph);
      CHECK(v == c.measure(ph));
      CHECK(v == std::floor(v));
    }
    TransferFeedback unbound(tiling, b.pad, b.camera.collapse(b.mask.mask), noise);
    CHECK_THROWS_AS(unbound.expected(ph), StateError);
  }

  TEST_CASE("mode overlay") {
    const auto tiling = make_tiling(64, 4, 64);
    auto state = ControlState::flat(tiling);
    for (std::size_t i = 0; i < 16; ++i) state.phases[i] = 0.1 * static_cast<double>(i);
    const auto once = add_mode_overlay(state, ModeOverlay::pi_step_horizontal);
    const auto twice = add_mode_overlay(once, ModeOverlay::pi_step_horizontal);
    for (std::size_t i = 0; i < 16; ++i) {
      const bool right = i % 4 >= 2;
      CHECK(once.phases[i] - state.phases[i] == doctest::Approx(right ? kPi : 0.0));
      CHECK(std::remainder(twice.phases[i] - state.phases[i], 2 * kPi) == doctest::Approx(0.0));
    }
    const auto vert = add_mode_overlay(state, ModeOverlay::pi_step_vertical);
    CHECK(vert.phases[9] - state.phases[9] == doctest::Approx(kPi));
    CHECK(vert.phases[3] == state.phases[3]);
    CHECK(parse_mode_overlay("pi_step_vertical") == ModeOverlay::pi_step_vertical);
    CHECK_THROWS(parse_mode_overlay("donut"));
  }

  TEST_CASE("pi step on an unscattered beam gives a two-lobed far field with a null") {
    const double dx = 12.5e-6;
    const auto pump = gaussian_beam(1.4e-3, 512, dx, 404e-9);
    const auto tiling = make_tiling_for_beam(512, 30, dx, 1.4e-3);
    const auto state = add_mode_overlay(ControlState::flat(tiling), ModeOverlay::pi_step_horizontal);
    const auto out = far_field(apply_phase(pump, state.render(dx), 1.0), 0.3, 2);
    const std::size_t c = out.size() / 2;
    double peak = 0, left = 0, right = 0;
    for (std::size_t r = 0; r < out.size(); ++r)
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double v = out.intensity(r, k);
        peak = std::max(peak, v);
        if (k < c) left = std::max(left, v);
        if (k > c) right = std::max(right, v);
      }
    CHECK(out.intensity(c, c) < 0.05 * peak);
    CHECK(std::min(left, right) / std::max(left, right) > 0.9);
  }

  TEST_CASE("feedback names") {
    for (auto m : {FeedbackMode::pump_noiseless, FeedbackMode::pump_camera, FeedbackMode::coincidence_counts}) {
      CHECK(parse_feedback_mode(feedback_mode_name(m)) == m);
    }
    CHECK_THROWS(parse_feedback_mode("psychic"));
    FeedbackSpec spec;
    spec.mode = FeedbackMode::coincidence_counts;
    CHECK_THROWS(spec.validate());
  }
}

#include "pumpshape/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#include "pumpshape/export.hpp"
#include "pumpshape/field_optics.hpp"
#include "pumpshape/kernels.hpp"
#include "pumpshape/metrics.hpp"

namespace pumpshape {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

std::string scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::screen_validate: return "screen-validate";
    case ScenarioKind::speckle: return "speckle";
    case ScenarioKind::optimize_static: return "optimize-static";
    case ScenarioKind::optimize_dynamic: return "optimize-dynamic";
    case ScenarioKind::higher_mode: return "higher-mode";
  }
  return "unknown";
}

ScenarioKind parse_scenario(const std::string& s) {
  for (auto k : {ScenarioKind::screen_validate, ScenarioKind::speckle, ScenarioKind::optimize_static,
                 ScenarioKind::optimize_dynamic, ScenarioKind::higher_mode}) {
    if (scenario_name(k) == s) return k;
  }
  throw ConfigError("unknown scenario: " + s);
}

ScenarioConfig preset_config(const std::string& preset, ScenarioKind kind) {
  ScenarioConfig c;
  c.kind = kind;
  c.preset = preset;
  if (preset == "lab") {
    c.turbulence = {1e-15, 1000.0, 808e-9, 10e-3, 5e-6, 1000.0};
    c.grid = {512, 12.5e-6, 2};
    c.beams = {1.4e-3, 0.7e-3, 1.4e-3};
    c.focal_length = 0.3;
  } else if (preset == "field") {
    c.turbulence = {1e-15, 1000.0, 808e-9, 10.0, 5e-3, 1.0};
    c.grid = {512, 12.5e-3, 2};
    c.beams = {1.4, 0.7, 1.4};
    c.focal_length = 300.0;
  } else {
    throw ConfigError("unknown preset: " + preset + " (expected lab or field)");
  }
  return c;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

ScenarioConfig config_from_json(const json& j, std::optional<std::string> preset) {
  check_keys(j,
             {"scenario", "preset", "seed", "turbulence", "grid", "beams", "focal_length", "spdc",
              "detection", "shaper", "dynamic", "validate", "exposures", "camera_peak_counts"},
             "config");
  std::string p = preset.value_or(j.value("preset", std::string("lab")));
  ScenarioKind kind = ScenarioKind::optimize_static;
  if (j.contains("scenario")) kind = parse_scenario(j.at("scenario").get<std::string>());
  ScenarioConfig c = preset_config(p, kind);
  read(j, "seed", c.seed);
  read(j, "focal_length", c.focal_length);
  read(j, "camera_peak_counts", c.camera_peak_counts);

  if (j.contains("turbulence")) {
    const auto& t = j.at("turbulence");
    check_keys(t, {"cn2", "z", "lambda", "l_o", "l_i", "scale_down"}, "turbulence");
    c.turbulence = io::turbulence_from_json(t, c.turbulence);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"n", "dx", "pad"}, "grid");
    read(g, "n", c.grid.n);
    read(g, "dx", c.grid.dx);
    read(g, "pad", c.grid.pad);
  }
  if (j.contains("beams")) {
    const auto& b = j.at("beams");
    check_keys(b, {"control_waist", "crystal_waist", "screen_waist"}, "beams");
    read(b, "control_waist", c.beams.control_waist);
    read(b, "crystal_waist", c.beams.crystal_waist);
    read(b, "screen_waist", c.beams.screen_waist);
  }
  if (j.contains("spdc")) {
    const auto& s = j.at("spdc");
    check_keys(s, {"pump_wavelength", "pair_wavelength", "beta", "idler_x", "idler_y", "peak_coincidence_rate",
                   "singles_peak_rate", "singles_width", "schmidt_number"},
               "spdc");
    read(s, "pump_wavelength", c.spdc.pump_wavelength);
    c.spdc.pair_wavelength = 2.0 * c.spdc.pump_wavelength;
    if (s.contains("pair_wavelength") &&
        std::abs(s.at("pair_wavelength").get<double>() / c.spdc.pair_wavelength - 1.0) > 1e-9) {
      throw ConfigError("spdc.pair_wavelength must be twice spdc.pump_wavelength (degenerate pairs)");
    }
    read(s, "beta", c.spdc.beta);
    read(s, "idler_x", c.spdc.idler_x);
    read(s, "idler_y", c.spdc.idler_y);
    read(s, "peak_coincidence_rate", c.spdc.peak_coincidence_rate);
    read(s, "singles_peak_rate", c.spdc.singles_peak_rate);
    read(s, "singles_width", c.spdc.singles_width);
    read(s, "schmidt_number", c.spdc.schmidt_number);
  }
  if (j.contains("detection")) {
    const auto& d = j.at("detection");
    check_keys(d, {"scan_points", "scan_step", "collection_diameter", "accidental_rate",
                   "camera_pixel", "camera_pixels", "camera_exposure", "camera_shot_noise",
                   "coincidence_window"},
               "detection");
    read(d, "scan_points", c.detection.scan.points);
    read(d, "scan_step", c.detection.scan.step);
    read(d, "collection_diameter", c.detection.collection_diameter);
    read(d, "accidental_rate", c.detection.accidental_rate);
    read(d, "camera_pixel", c.detection.camera_pixel);
    read(d, "camera_pixels", c.detection.camera_pixels);
    read(d, "camera_exposure", c.detection.camera_exposure);
    read(d, "camera_shot_noise", c.detection.camera_shot_noise);
    read(d, "coincidence_window", c.detection.coincidence_window);
  }
  if (j.contains("shaper")) {
    const auto& s = j.at("shaper");
    check_keys(s, {"segments", "n_phases", "budget", "feedback", "probe_exposure", "aperture_waists",
                   "transmission_after", "overlay"},
               "shaper");
    read(s, "segments", c.shaper.segments);
    read(s, "n_phases", c.shaper.n_phases);
    read(s, "budget", c.shaper.budget);
    if (s.contains("feedback")) c.shaper.feedback = parse_feedback_mode(s.at("feedback").get<std::string>());
    read(s, "probe_exposure", c.shaper.probe_exposure);
    read(s, "aperture_waists", c.shaper.aperture_waists);
    read(s, "transmission_after", c.shaper.transmission_after);
    if (s.contains("overlay")) c.shaper.overlay = parse_mode_overlay(s.at("overlay").get<std::string>());
  }
  if (j.contains("dynamic")) {
    const auto& d = j.at("dynamic");
    check_keys(d, {"master_n", "steps_before", "steps_optimizing", "steps_frozen", "cols_per_step",
                   "iterations_per_step", "exposure_per_step"},
               "dynamic");
    read(d, "master_n", c.dynamic.master_n);
    read(d, "steps_before", c.dynamic.steps_before);
    read(d, "steps_optimizing", c.dynamic.steps_optimizing);
    read(d, "steps_frozen", c.dynamic.steps_frozen);
    read(d, "cols_per_step", c.dynamic.cols_per_step);
    read(d, "iterations_per_step", c.dynamic.iterations_per_step);
    read(d, "exposure_per_step", c.dynamic.exposure_per_step);
  }
  if (j.contains("validate")) {
    const auto& v = j.at("validate");
    check_keys(v, {"screens", "n", "r0_samples", "lags"}, "validate");
    read(v, "screens", c.validate.screens);
    read(v, "n", c.validate.n);
    read(v, "r0_samples", c.validate.r0_samples);
    read(v, "lags", c.validate.lags);
  }
  if (j.contains("exposures")) {
    const auto& e = j.at("exposures");
    check_keys(e, {"reference", "scattered", "optimized", "speckle", "higher_mode"}, "exposures");
    read(e, "reference", c.exposures.reference);
    read(e, "scattered", c.exposures.scattered);
    read(e, "optimized", c.exposures.optimized);
    read(e, "speckle", c.exposures.speckle);
    read(e, "higher_mode", c.exposures.higher_mode);
  }
  return c;
}

json to_json(const ScenarioConfig& c) {
  const auto& d = c.detection;
  return {
      {"scenario", scenario_name(c.kind)},
      {"preset", c.preset},
      {"seed", c.seed},
      {"turbulence", io::to_json(c.turbulence)},
      {"grid", {{"n", c.grid.n}, {"dx", c.grid.dx}, {"pad", c.grid.pad}}},
      {"beams",
       {{"control_waist", c.beams.control_waist},
        {"crystal_waist", c.beams.crystal_waist},
        {"screen_waist", c.beams.screen_waist}}},
      {"focal_length", c.focal_length},
      {"spdc",
       {{"pump_wavelength", c.spdc.pump_wavelength},
        {"pair_wavelength", c.spdc.pair_wavelength},
        {"beta", c.spdc.beta},
        {"idler_x", c.spdc.idler_x},
        {"idler_y", c.spdc.idler_y},
        {"peak_coincidence_rate", c.spdc.peak_coincidence_rate},
        {"singles_peak_rate", c.spdc.singles_peak_rate},
        {"singles_width", c.spdc.singles_width},
        {"schmidt_number", c.spdc.schmidt_number}}},
      {"detection",
       {{"scan_points", d.scan.points},
        {"scan_step", d.scan.step},
        {"collection_diameter", d.collection_diameter},
        {"accidental_rate", d.accidental_rate},
        {"camera_pixel", d.camera_pixel},
        {"camera_pixels", d.camera_pixels},
        {"camera_exposure", d.camera_exposure},
        {"camera_shot_noise", d.camera_shot_noise},
        {"coincidence_window", d.coincidence_window}}},
      {"shaper",
       {{"segments", c.shaper.segments},
        {"n_phases", c.shaper.n_phases},
        {"budget", c.shaper.budget},
        {"feedback", feedback_mode_name(c.shaper.feedback)},
        {"probe_exposure", c.shaper.probe_exposure},
        {"aperture_waists", c.shaper.aperture_waists},
        {"transmission_after", c.shaper.transmission_after},
        {"overlay", c.shaper.overlay == ModeOverlay::pi_step_horizontal ? "pi_step_horizontal"
                                                                         : "pi_step_vertical"}}},
      {"dynamic",
       {{"master_n", c.dynamic.master_n},
        {"steps_before", c.dynamic.steps_before},
        {"steps_optimizing", c.dynamic.steps_optimizing},
        {"steps_frozen", c.dynamic.steps_frozen},
        {"cols_per_step", c.dynamic.cols_per_step},
        {"iterations_per_step", c.dynamic.iterations_per_step},
        {"exposure_per_step", c.dynamic.exposure_per_step}}},
      {"validate",
       {{"screens", c.validate.screens},
        {"n", c.validate.n},
        {"r0_samples", c.validate.r0_samples},
        {"lags", c.validate.lags}}},
      {"exposures",
       {{"reference", c.exposures.reference},
        {"scattered", c.exposures.scattered},
        {"optimized", c.exposures.optimized},
        {"speckle", c.exposures.speckle},
        {"higher_mode", c.exposures.higher_mode}}},
      {"camera_peak_counts", c.camera_peak_counts},
  };
}

void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  try {
    c.turbulence.validate();
    c.spdc.validate();
    c.detection.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (c.kind == ScenarioKind::screen_validate) {
    if (!is_power_of_two(c.validate.n)) fail("validate.n must be a power of two");
    if (c.validate.screens < 2) fail("validate.screens must be at least 2");
    if (!(c.validate.r0_samples > 0.0)) fail("validate.r0_samples must be positive");
    for (auto lag : c.validate.lags) {
      if (lag == 0 || lag >= c.validate.n) fail("validate.lags must lie inside the grid");
    }
    return;
  }
  if (!is_power_of_two(c.grid.n)) fail("grid.n must be a power of two");
  if (!is_power_of_two(c.grid.pad)) fail("grid.pad must be a power of two");
  if (!(c.grid.dx > 0.0)) fail("grid.dx must be positive");
  if (!(c.focal_length > 0.0)) fail("focal_length must be positive");
  if (c.spdc.pump_wavelength <= 0.0) fail("spdc.pump_wavelength must be positive");
  if (c.beams.screen_waist < 4.0 * c.grid.dx) {
    fail("beams.screen_waist spans fewer than 4 grid samples; refine grid.dx");
  }
  const double extent = static_cast<double>(c.grid.n) * c.grid.dx;
  if (3.0 * c.beams.screen_waist > extent) {
    fail("beam (3 waists) does not fit on the grid: increase grid.n or grid.dx");
  }
  const double aperture = c.shaper.aperture_waists * c.beams.control_waist;
  if (aperture > extent) fail("segmented aperture (shaper.aperture_waists x control_waist) exceeds the grid");
  if (c.shaper.segments == 0) fail("shaper.segments must be positive");
  if (aperture / c.grid.dx < static_cast<double>(c.shaper.segments)) {
    fail("fewer grid samples across the aperture than segments");
  }
  if (c.shaper.n_phases < 3) fail("shaper.n_phases must be at least 3");
  if (!(c.shaper.transmission_after > 0.0 && c.shaper.transmission_after <= 1.0)) {
    fail("shaper.transmission_after must lie in (0, 1]");
  }
  if (c.shaper.feedback == FeedbackMode::coincidence_counts && !(c.shaper.probe_exposure > 0.0)) {
    fail("coincidence feedback needs shaper.probe_exposure > 0");
  }
  // Scan window against the coincidence plane.
  const double pitch_pair = c.focal_length * c.spdc.pair_wavelength /
                            (static_cast<double>(c.grid.pad * c.grid.n) * c.grid.dx);
  const double half_plane = static_cast<double>(c.grid.pad * c.grid.n / 2 - 1) * pitch_pair;
  const double half_scan = static_cast<double>(c.detection.scan.points / 2) * c.detection.scan.step +
                           0.5 * c.detection.collection_diameter;
  if (half_scan + std::max(std::abs(c.spdc.idler_x), std::abs(c.spdc.idler_y)) > half_plane) {
    fail("scan window extends beyond the computed coincidence plane");
  }
  const double pitch_pump = pitch_pair / 2.0;
  const double half_cam = static_cast<double>(c.detection.camera_pixels / 2 + 1) * c.detection.camera_pixel;
  if (half_cam > static_cast<double>(c.grid.pad * c.grid.n / 2 - 1) * pitch_pump) {
    fail("camera window extends beyond the computed pump far field");
  }
  if (c.kind == ScenarioKind::optimize_dynamic) {
    const auto& d = c.dynamic;
    if (d.master_n <= c.grid.n || !is_power_of_two(d.master_n)) {
      fail("dynamic.master_n must be a power of two larger than grid.n");
    }
    const std::size_t steps = d.steps_before + d.steps_optimizing + d.steps_frozen;
    if (steps == 0 || d.steps_optimizing == 0 || d.steps_frozen == 0) {
      fail("dynamic schedule needs optimizing and frozen steps");
    }
    if ((steps - 1) * d.cols_per_step + c.grid.n > d.master_n) {
      fail("dynamic schedule moves the window off the master screen");
    }
  }
}

// ---------------------------------------------------------------------------
// Shared optical bench

namespace {

enum Stream : std::uint64_t {
  kScreen = 1,
  kShaper = 2,
  kFeedback = 3,
  kDynamicCounts = 4,
  kScan = 100,
  kCamera = 200,
};

struct Bench {
  const ScenarioConfig& cfg;
  ComplexField pump0;
  SegmentTiling tiling;
  FarFieldMap pump_ref;
  FarFieldMap coinc_ref;  // rate-calibrated
  double rate_k = 0.0;
  DetectionConfig det;
  Observation camera_obs;
  Observation scan_obs;
  TargetMask pump_mask;
  TargetMask coinc_mask;
  std::size_t scan_center = 0;
  std::size_t camera_center = 0;

  explicit Bench(const ScenarioConfig& c) : cfg(c) {
    const auto& g = c.grid;
    pump0 = gaussian_beam(c.beams.screen_waist, g.n, g.dx, c.spdc.pump_wavelength);
    tiling = make_tiling_for_beam(g.n, c.shaper.segments, g.dx, c.beams.control_waist,
                                  c.shaper.aperture_waists);
    pump_ref = far_field(pump0, c.focal_length, g.pad);

    det = c.detection;
    det.scan.center_x = -c.spdc.idler_x;
    det.scan.center_y = -c.spdc.idler_y;
    const FarFieldMap coinc_raw = coincidence_pattern(pump0, c.focal_length, c.spdc, g.pad);
    rate_k = rate_scale(coinc_raw, det, c.spdc.peak_coincidence_rate);
    coinc_ref = scaled(coinc_raw, rate_k);
    scan_obs = scan_observation(coinc_ref, det.scan, det.collection_diameter);
    camera_obs = camera_observation(pump_ref, det.camera_pixel, det.camera_pixels);

    const Grid<double> cam = camera_obs.apply(pump_ref.intensity);
    const double peak = *std::max_element(cam.values().begin(), cam.values().end());
    det.camera_gain = c.camera_peak_counts / (det.camera_exposure * peak);

    pump_mask = target_mask(camera_expected(pump_ref), "unscattered pump camera frame");
    coinc_mask = target_mask(scan_obs.apply(coinc_ref.intensity), "unscattered coincidence scan");
    const std::size_t p = det.scan.points;
    scan_center = (p / 2) * p + p / 2;
    const std::size_t q = det.camera_pixels;
    camera_center = (q / 2) * q + q / 2;
  }

  FarFieldMap pump_pattern(const PhaseScreen& control, const PhaseScreen& atm) const {
    return far_field(apply_phase(apply_phase(pump0, control, 1.0), atm, 1.0), cfg.focal_length,
                     cfg.grid.pad);
  }

  FarFieldMap coinc_pattern(const PhaseScreen& control, const PhaseScreen& atm) const {
    return scaled(coincidence_pattern(effective_pair_field(pump0, control, atm, cfg.spdc.beta),
                                      cfg.focal_length, cfg.spdc, cfg.grid.pad),
                  rate_k);
  }

  Grid<double> camera_expected(const FarFieldMap& pump) const {
    Grid<double> g = camera_obs.apply(pump.intensity);
    const double s = det.camera_gain * det.camera_exposure;
    for (auto& v : g.values()) v *= s;
    return g;
  }

  Grid<double> scan_expected(const FarFieldMap& coinc) const { return scan_obs.apply(coinc.intensity); }

  CountMap camera(const FarFieldMap& pump, std::uint64_t stream) const {
    DetectionConfig d = det;
    d.seed = derive_seed(cfg.seed, kCamera + stream);
    return camera_capture(pump, d, camera_obs);
  }

  CountMap scan(const FarFieldMap& coinc, double exposure, std::uint64_t stream) const {
    DetectionConfig d = det;
    d.exposure_per_point = exposure;
    d.seed = derive_seed(cfg.seed, kScan + stream);
    return subtract_accidentals(scan_coincidences(coinc, d, scan_obs), d);
  }

  PhaseScreen atmosphere() const {
    return generate_screen(cfg.turbulence, cfg.grid.n, cfg.grid.dx, derive_seed(cfg.seed, kScreen));
  }

  PhaseScreen flat() const { return flat_screen(cfg.grid.n, cfg.grid.dx); }

  std::unique_ptr<TransferFeedback> feedback(FeedbackMode mode, const PhaseScreen& atm,
                                             std::uint64_t seed) const {
    NoiseModel noise;
    noise.seed = seed;
    std::vector<Observation::Term> w;
    double factor = 1.0;
    if (mode == FeedbackMode::coincidence_counts) {
      w = scan_obs.collapse(coinc_mask.mask);
      for (auto& t : w) t.second *= rate_k;
      noise.poisson = true;
      noise.scale = cfg.shaper.probe_exposure;
      noise.offset = det.accidental_rate * cfg.shaper.probe_exposure *
                     static_cast<double>(coinc_mask.count());
      factor = cfg.spdc.beta;
    } else {
      w = camera_obs.collapse(pump_mask.mask);
      noise.poisson = mode == FeedbackMode::pump_camera;
      noise.scale = det.camera_gain * det.camera_exposure;
    }
    auto fb = std::make_unique<TransferFeedback>(tiling, cfg.grid.pad, std::move(w), noise);
    fb->bind(apply_phase(pump0, atm, factor));
    return fb;
  }

  /// Noise-free coincidence rate at the centre scan point.
  std::unique_ptr<TransferFeedback> center_monitor(const PhaseScreen& atm) const {
    auto w = scan_obs.terms(scan_center);
    for (auto& t : w) t.second *= rate_k;
    auto fb = std::make_unique<TransferFeedback>(tiling, cfg.grid.pad, std::move(w), NoiseModel{});
    fb->bind(apply_phase(pump0, atm, cfg.spdc.beta));
    return fb;
  }

  json derived() const {
    const auto& t = cfg.turbulence;
    const double r0 = t.r0();
    const auto iso = isoplanatic_bound(r0, t.wavelength);
    const double r0_pump =
        fried_parameter(cfg.spdc.pump_wavelength, t.cn2, t.link_length) / t.scale_down;
    return {
        {"r0", r0},
        {"r0_at_808nm", fried_parameter(808e-9, t.cn2, t.link_length) / t.scale_down},
        {"r0_at_pump_wavelength", r0_pump},
        {"r0_samples", r0 / cfg.grid.dx},
        {"rho0", iso.rho0},
        {"z_max", iso.z_max},
        {"k_o", t.outer_wavenumber()},
        {"k_m", t.inner_wavenumber()},
        {"pump_far_field_pitch", pump_ref.pitch},
        {"coincidence_pitch", coinc_ref.pitch},
        {"far_field_samples", pump_ref.size()},
        {"segment_aperture_samples", tiling.aperture},
        {"segment_aperture_m", static_cast<double>(tiling.aperture) * cfg.grid.dx},
        {"coincidence_rate_scale", rate_k},
        {"camera_gain", det.camera_gain},
        {"pump_mask_pixels", pump_mask.count()},
        {"coincidence_mask_points", coinc_mask.count()},
        {"scan_center", {det.scan.center_x, det.scan.center_y}},
        {"pump_speckle_grain",
         cfg.spdc.pump_wavelength * cfg.focal_length / (std::numbers::pi * cfg.beams.screen_waist)},
        {"screen_warnings", screen_warnings(t, cfg.grid.n, cfg.grid.dx)},
        {"kernel_isa", std::string(kernels::isa_name(kernels::active().isa))},
    };
  }
};

double mean_of(const Grid<double>& g) {
  return std::accumulate(g.values().begin(), g.values().end(), 0.0) / static_cast<double>(g.count());
}

double max_of(const Grid<double>& g) { return *std::max_element(g.values().begin(), g.values().end()); }
double min_of(const Grid<double>& g) { return *std::min_element(g.values().begin(), g.values().end()); }

/// Pearson correlation between the pump pattern magnified to the coincidence
/// scale and the coincidence pattern, over the central half of the plane.
double pearson_rescaled(const FarFieldMap& pump, const FarFieldMap& coinc) {
  const FarFieldMap a = rescale_pattern(pump, coinc.pitch / pump.pitch);
  const FarFieldMap b = resample_pattern(coinc, pump.size(), pump.pitch, coinc.center_x, coinc.center_y);
  const std::size_t n = pump.size();
  const std::size_t lo = n / 4, hi = n - n / 4;
  std::vector<double> va, vb;
  va.reserve((hi - lo) * (hi - lo));
  vb.reserve((hi - lo) * (hi - lo));
  for (std::size_t r = lo; r < hi; ++r) {
    for (std::size_t c = lo; c < hi; ++c) {
      va.push_back(a.intensity(r, c));
      vb.push_back(b.intensity(r, c));
    }
  }
  return pearson(va, vb);
}

struct Lobes {
  double on_axis = 0.0;
  double peak = 0.0;
  double first = 0.0;   // left / top half
  double second = 0.0;  // right / bottom half
};

Lobes lobes(const Grid<double>& g, ModeOverlay mode) {
  Lobes l;
  const std::size_t n = g.size(), c = n / 2;
  l.on_axis = g(c, c);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      const std::size_t coord = mode == ModeOverlay::pi_step_horizontal ? col : r;
      const double v = g(r, col);
      if (coord < c) l.first = std::max(l.first, v);
      if (coord > c) l.second = std::max(l.second, v);
      l.peak = std::max(l.peak, v);
    }
  }
  return l;
}

json lobes_json(const Lobes& l) {
  return {{"on_axis", l.on_axis},
          {"lobe_peak", l.peak},
          {"first_lobe_peak", l.first},
          {"second_lobe_peak", l.second},
          {"null_ratio", l.peak > 0 ? l.on_axis / l.peak : 0.0},
          {"lobe_balance", std::max(l.first, l.second) > 0
                               ? std::min(l.first, l.second) / std::max(l.first, l.second)
                               : 0.0}};
}

class Writer {
 public:
  explicit Writer(const std::optional<fs::path>& out) : out_(out) {
    if (out_) fs::create_directories(*out_);
  }
  bool enabled() const { return out_.has_value(); }
  const fs::path& dir() const { return *out_; }
  void add(const std::vector<std::string>& names) { files_.insert(files_.end(), names.begin(), names.end()); }
  std::vector<std::string> files() const { return files_; }

 private:
  std::optional<fs::path> out_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// Scenarios

json run_screen_validate(const ScenarioConfig& c, Writer& w) {
  const auto& v = c.validate;
  const double r0 = c.turbulence.r0();
  const double dx = r0 / v.r0_samples;
  StructureAccumulator acc(v.lags);
  double sum_center = 0.0, sum_center_sq = 0.0;
  PhaseScreen first;
  for (std::size_t i = 0; i < v.screens; ++i) {
    PhaseScreen s = generate_screen(c.turbulence, v.n, dx, derive_seed(c.seed, kScreen + 1000 + i));
    acc.add(s);
    const double centre = s.phase(v.n / 2, v.n / 2);
    sum_center += centre;
    sum_center_sq += centre * centre;
    if (i == 0) first = std::move(s);
  }
  const auto curve = acc.result();
  json rows = json::array();
  double worst_k = 0.0, worst_band = 0.0, worst_iso = 0.0;
  const std::size_t band_hi = v.n / 8;
  std::ostringstream csv;
  csv << "lag,separation,d_rows,d_cols,d,d_kolmogorov,d_sampled_band\n" << std::setprecision(12);
  for (const auto& p : curve) {
    const double dk = kolmogorov_structure_function(p.separation, r0);
    const double db = sampled_band_structure_function(c.turbulence, v.n, dx, p.lag);
    csv << p.lag << ',' << p.separation << ',' << p.along_rows << ',' << p.along_cols << ','
        << p.value << ',' << dk << ',' << db << '\n';
    rows.push_back({{"lag", p.lag},
                    {"separation", p.separation},
                    {"d", p.value},
                    {"d_rows", p.along_rows},
                    {"d_cols", p.along_cols},
                    {"d_kolmogorov", dk},
                    {"d_sampled_band", db}});
    if (p.lag >= 4 && p.lag <= band_hi) {
      worst_k = std::max(worst_k, std::abs(p.value / dk - 1.0));
      worst_band = std::max(worst_band, std::abs(p.value / db - 1.0));
      worst_iso = std::max(worst_iso, std::abs(p.along_rows / p.along_cols - 1.0));
    }
  }
  const double nscr = static_cast<double>(v.screens);
  const double mean_c = sum_center / nscr;
  const double var_c = sum_center_sq / nscr - mean_c * mean_c;
  if (w.enabled()) {
    std::ofstream(w.dir() / "structure_function.csv") << csv.str();
    w.add({"structure_function.csv"});
    w.add(io::export_screen(w.dir(), "sample_screen", first));
  }
  return {{"screens", v.screens},
          {"n", v.n},
          {"dx", dx},
          {"r0", r0},
          {"band_lags", {4, band_hi}},
          {"curve", rows},
          {"max_rel_dev_kolmogorov", worst_k},
          {"max_rel_dev_sampled_band", worst_band},
          {"max_rel_dev_isotropy", worst_iso},
          {"center_mean", mean_c},
          {"center_mean_z", var_c > 0 ? mean_c / std::sqrt(var_c / nscr) : 0.0}};
}

json run_speckle(const Bench& b, Writer& w) {
  const auto& c = b.cfg;
  const PhaseScreen atm = b.atmosphere();
  const PhaseScreen flat = b.flat();
  const FarFieldMap pump = b.pump_pattern(flat, atm);
  const FarFieldMap coinc = b.coinc_pattern(flat, atm);
  const CountMap frame = b.camera(pump, 1);
  const CountMap scan = b.scan(coinc, c.exposures.speckle, 1);
  const Grid<double> scan_rates_expected = b.scan_expected(coinc);
  const Grid<double> scan_rates = scan.rates();

  json m;
  m["pearson_scale2"] = pearson_rescaled(pump, coinc);
  m["beta"] = c.spdc.beta;
  m["speckle_contrast_expected"] = max_of(scan_rates_expected) / mean_of(scan_rates_expected);
  m["speckle_contrast_measured"] = max_of(scan_rates) / mean_of(scan_rates);
  m["scan_mean_rate_expected"] = mean_of(scan_rates_expected);
  m["scan_mean_rate_measured"] = mean_of(scan_rates);
  m["exposure_per_point"] = c.exposures.speckle;
  m["camera_exposure"] = c.detection.camera_exposure;
  if (w.enabled()) {
    const json cside = {{"beta", c.spdc.beta},
                        {"idler_position", {c.spdc.idler_x, c.spdc.idler_y}},
                        {"pair_wavelength", c.spdc.pair_wavelength}};
    w.add(io::export_screen(w.dir(), "atmosphere", atm));
    w.add(io::export_map(w.dir(), "pump_far_field", pump));
    w.add(io::export_map(w.dir(), "coincidence_pattern", coinc, cside));
    w.add(io::export_counts(w.dir(), "pump_camera", frame));
    w.add(io::export_counts(w.dir(), "coincidence_scan", scan, cside));
  }
  return m;
}

struct StaticRun {
  PhaseScreen atm;
  ControlState state;
  double initial_feedback = 0.0;
  double final_feedback = 0.0;
};

StaticRun optimise_static(const Bench& b) {
  const auto& c = b.cfg;
  StaticRun run{b.atmosphere(), ControlState::flat(b.tiling)};
  auto fb = b.feedback(c.shaper.feedback, run.atm, derive_seed(c.seed, kFeedback));
  std::mt19937_64 rng(derive_seed(c.seed, kShaper));
  run.initial_feedback = fb->expected(run.state.phases);
  OptimizationOptions opts;
  opts.budget = c.shaper.budget;
  opts.n_phases = c.shaper.n_phases;
  run_optimization(run.state, *fb, opts, rng);
  run.final_feedback = fb->expected(run.state.phases);
  return run;
}

json static_metrics(const Bench& b, const StaticRun& run, Writer& w) {
  const auto& c = b.cfg;
  const PhaseScreen flat = b.flat();
  const PhaseScreen control = run.state.render(c.grid.dx);

  const FarFieldMap pump_before = b.pump_pattern(flat, run.atm);
  const FarFieldMap pump_after = b.pump_pattern(control, run.atm);
  const FarFieldMap coinc_before = b.coinc_pattern(flat, run.atm);
  const FarFieldMap coinc_after = b.coinc_pattern(control, run.atm);

  // Noise-free observations.
  const Grid<double> cam_ref = b.camera_expected(b.pump_ref);
  const Grid<double> cam_before = b.camera_expected(pump_before);
  const Grid<double> cam_after = b.camera_expected(pump_after);
  const Grid<double> scan_ref = b.scan_expected(b.coinc_ref);
  const Grid<double> scan_before = b.scan_expected(coinc_before);
  const Grid<double> scan_after = b.scan_expected(coinc_after);

  // Measurements.
  const CountMap f_ref = b.camera(b.pump_ref, 1);
  const CountMap f_before = b.camera(pump_before, 2);
  const CountMap f_after = b.camera(pump_after, 3);
  const CountMap s_ref = b.scan(b.coinc_ref, c.exposures.reference, 1);
  const CountMap s_before = b.scan(coinc_before, c.exposures.scattered, 2);
  const CountMap s_after = b.scan(coinc_after, c.exposures.optimized, 3);

  const FarFieldMap singles_before =
      singles_envelope(c.spdc, 1.0, c.detection.scan.points, c.detection.scan.step,
                       b.det.scan.center_x, b.det.scan.center_y);
  const FarFieldMap singles_after =
      singles_envelope(c.spdc, c.shaper.transmission_after, c.detection.scan.points,
                       c.detection.scan.step, b.det.scan.center_x, b.det.scan.center_y);

  json m;
  m["eta_pump_expected"] = enhancement(cam_before, cam_after, b.pump_mask);
  m["eta_spdc_expected"] = enhancement(scan_before, scan_after, b.coinc_mask);
  m["efficiency_pump_expected"] = efficiency(cam_after, cam_ref, b.pump_mask);
  m["efficiency_spdc_expected"] = efficiency(scan_after, scan_ref, b.coinc_mask);
  m["eta_pump"] = enhancement(f_before.rates(), f_after.rates(), b.pump_mask);
  m["eta_spdc"] = enhancement(s_before.rates(), s_after.rates(), b.coinc_mask);
  m["efficiency_pump"] = efficiency(f_after.rates(), f_ref.rates(), b.pump_mask);
  m["efficiency_spdc"] = efficiency(s_after.rates(), s_ref.rates(), b.coinc_mask);
  m["pearson_scale2"] = pearson_rescaled(pump_before, coinc_before);
  m["masks"] = {{"pump_pixels", b.pump_mask.count()},
                {"pump_source", b.pump_mask.source},
                {"spdc_points", b.coinc_mask.count()},
                {"spdc_source", b.coinc_mask.source}};
  m["seeds"] = {{"master", c.seed},
                {"screen", derive_seed(c.seed, kScreen)},
                {"shaper", derive_seed(c.seed, kShaper)},
                {"feedback", derive_seed(c.seed, kFeedback)}};
  m["budgets"] = {{"budget", c.shaper.budget},
                  {"measurements", run.state.trace.size()},
                  {"iterations", run.state.iterations},
                  {"n_phases", c.shaper.n_phases},
                  {"segments", c.shaper.segments},
                  {"feedback", feedback_mode_name(c.shaper.feedback)}};
  m["feedback_initial_expected"] = run.initial_feedback;
  m["feedback_final_expected"] = run.final_feedback;
  m["singles"] = {{"before_min", min_of(singles_before.intensity)},
                  {"before_max", max_of(singles_before.intensity)},
                  {"after_min", min_of(singles_after.intensity)},
                  {"after_max", max_of(singles_after.intensity)}};
  m["exposures"] = {{"reference", c.exposures.reference},
                    {"scattered", c.exposures.scattered},
                    {"optimized", c.exposures.optimized},
                    {"camera", c.detection.camera_exposure}};
  m["beta"] = c.spdc.beta;

  if (w.enabled()) {
    const json cside = {{"beta", c.spdc.beta},
                        {"idler_position", {c.spdc.idler_x, c.spdc.idler_y}},
                        {"pair_wavelength", c.spdc.pair_wavelength}};
    const auto& d = w.dir();
    w.add(io::export_screen(d, "atmosphere", run.atm));
    w.add(io::export_screen(d, "control_phase", control));
    w.add(io::export_trace(d, "trace", run.state.trace));
    w.add(io::export_counts(d, "a_coincidence_reference", s_ref, cside));
    w.add(io::export_counts(d, "b_pump_reference", f_ref));
    w.add(io::export_counts(d, "c_coincidence_scattered", s_before, cside));
    w.add(io::export_counts(d, "d_pump_scattered", f_before));
    w.add(io::export_counts(d, "e_coincidence_optimized", s_after, cside));
    w.add(io::export_counts(d, "f_pump_optimized", f_after));
    w.add(io::export_map(d, "singles_before", singles_before, {{"slm1_transmission", 1.0}}));
    w.add(io::export_map(d, "singles_after", singles_after,
                         {{"slm1_transmission", c.shaper.transmission_after}}));
  }
  return m;
}

json run_higher_mode(const Bench& b, const StaticRun& run, Writer& w) {
  const auto& c = b.cfg;
  const ControlState moded = add_mode_overlay(run.state, c.shaper.overlay);
  const PhaseScreen control = moded.render(c.grid.dx);
  const FarFieldMap pump = b.pump_pattern(control, run.atm);
  const FarFieldMap coinc = b.coinc_pattern(control, run.atm);
  const Grid<double> scan_rates = b.scan_expected(coinc);
  const Grid<double> cam = b.camera_expected(pump);
  const CountMap scan = b.scan(coinc, c.exposures.higher_mode, 4);
  const CountMap frame = b.camera(pump, 4);

  // Pattern point-sampled at the scan positions, before fibre integration.
  const FarFieldMap sampled = resample_pattern(coinc, c.detection.scan.points, c.detection.scan.step,
                                               b.det.scan.center_x, b.det.scan.center_y);
  json m;
  m["spdc_pattern"] = lobes_json(lobes(sampled.intensity, c.shaper.overlay));
  m["spdc_expected"] = lobes_json(lobes(scan_rates, c.shaper.overlay));
  m["spdc_measured"] = lobes_json(lobes(scan.rates(), c.shaper.overlay));
  m["pump_expected"] = lobes_json(lobes(cam, c.shaper.overlay));
  m["overlay"] = c.shaper.overlay == ModeOverlay::pi_step_horizontal ? "pi_step_horizontal" : "pi_step_vertical";
  m["beta"] = c.spdc.beta;
  m["budgets"] = {{"budget", c.shaper.budget}, {"iterations", run.state.iterations}};
  if (w.enabled()) {
    const json cside = {{"beta", c.spdc.beta},
                        {"idler_position", {c.spdc.idler_x, c.spdc.idler_y}},
                        {"pair_wavelength", c.spdc.pair_wavelength}};
    w.add(io::export_screen(w.dir(), "control_phase_mode", control));
    w.add(io::export_counts(w.dir(), "a_coincidence_mode", scan, cside));
    w.add(io::export_counts(w.dir(), "b_pump_mode", frame));
  }
  return m;
}

json run_dynamic(const Bench& b, Writer& w) {
  const auto& c = b.cfg;
  const auto& d = c.dynamic;
  const std::size_t steps = d.steps_before + d.steps_optimizing + d.steps_frozen;
  const FrozenFlow flow = make_frozen_flow(c.turbulence, d.master_n, c.grid.n, c.grid.dx,
                                           derive_seed(c.seed, kScreen),
                                           linear_schedule(steps, d.cols_per_step));
  ControlState state = ControlState::flat(b.tiling);
  std::mt19937_64 rng(derive_seed(c.seed, kShaper));
  std::mt19937_64 count_rng(derive_seed(c.seed, kDynamicCounts));

  std::unique_ptr<TransferFeedback> fb;
  std::vector<double> pump_signal(steps), coinc_rate(steps), coinc_counts(steps);
  std::vector<std::string> label(steps);
  const std::size_t start = d.steps_before;
  const std::size_t stop = d.steps_before + d.steps_optimizing;  // first frozen step

  for (std::size_t s = 0; s < steps; ++s) {
    const PhaseScreen view = frozen_view(flow, s);
    if (!fb) {
      fb = b.feedback(c.shaper.feedback, view, derive_seed(c.seed, kFeedback));
    } else {
      fb->bind(apply_phase(b.pump0, view,
                           c.shaper.feedback == FeedbackMode::coincidence_counts ? c.spdc.beta : 1.0));
    }
    if (s >= start && s < stop) {
      label[s] = "optimizing";
      for (std::size_t i = 0; i < d.iterations_per_step; ++i) {
        partition_iteration(state, *fb, c.shaper.n_phases, rng);
      }
    } else {
      label[s] = s < start ? "before" : "frozen";
    }
    auto pump_monitor = b.feedback(FeedbackMode::pump_noiseless, view, 0);
    pump_signal[s] = pump_monitor->expected(state.phases) * b.det.camera_gain * b.det.camera_exposure;
    coinc_rate[s] = b.center_monitor(view)->expected(state.phases);
    const double mean = (coinc_rate[s] + b.det.accidental_rate) * d.exposure_per_step;
    std::poisson_distribution<long long> pois(mean > 0 ? mean : 1e-300);
    coinc_counts[s] = static_cast<double>(pois(count_rng)) - b.det.accidental_rate * d.exposure_per_step;
  }

  auto slice = [](const std::vector<double>& v, std::size_t a, std::size_t e) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(a), v.begin() + static_cast<std::ptrdiff_t>(e));
  };
  const double r0 = c.turbulence.r0();
  auto decay = [&](const std::vector<double>& v) -> json {
    const double ref = v[stop - 1];
    for (std::size_t s = stop; s < steps; ++s) {
      if (v[s] < 0.5 * ref) {
        const double shift = static_cast<double>((s - (stop - 1)) * d.cols_per_step) * c.grid.dx;
        return {{"reference", ref}, {"shift_m", shift}, {"shift_r0", shift / r0}, {"found", true}};
      }
    }
    return {{"reference", ref}, {"shift_m", nullptr}, {"shift_r0", nullptr}, {"found", false}};
  };

  json m;
  m["eta_pump_dynamic"] = dynamic_enhancement(slice(pump_signal, start, stop), slice(pump_signal, stop, steps));
  m["eta_spdc_dynamic_expected"] = dynamic_enhancement(slice(coinc_rate, start, stop), slice(coinc_rate, stop, steps));
  {
    auto during = slice(coinc_counts, start, stop), frozen = slice(coinc_counts, stop, steps);
    const double fm = std::accumulate(frozen.begin(), frozen.end(), 0.0);
    m["eta_spdc_dynamic"] = fm > 0 ? json(dynamic_enhancement(during, frozen)) : json(nullptr);
  }
  m["decay_spdc"] = decay(coinc_rate);
  m["decay_pump"] = decay(pump_signal);
  m["markers"] = {{"optimization_start_step", start}, {"optimization_stop_step", stop}};
  m["r0"] = r0;
  m["shift_per_step_m"] = static_cast<double>(d.cols_per_step) * c.grid.dx;
  m["iterations_per_step"] = d.iterations_per_step;
  m["measurements"] = state.trace.size();
  m["feedback"] = feedback_mode_name(c.shaper.feedback);

  if (w.enabled()) {
    std::ofstream csv(w.dir() / "timeline.csv");
    csv << "step,shift_samples,shift_m,phase,pump_signal,coincidence_rate_expected,coincidence_counts_corrected\n"
        << std::setprecision(12);
    for (std::size_t s = 0; s < steps; ++s) {
      csv << s << ',' << flow.schedule[s].col << ','
          << static_cast<double>(flow.schedule[s].col) * c.grid.dx << ',' << label[s] << ','
          << pump_signal[s] << ',' << coinc_rate[s] << ',' << coinc_counts[s] << '\n';
    }
    w.add({"timeline.csv"});
    w.add(io::export_screen(w.dir(), "master_screen", flow.master));
    w.add(io::export_trace(w.dir(), "trace", state.trace));
  }
  return m;
}

}  // namespace

Bundle run_scenario(const ScenarioConfig& config, const std::optional<fs::path>& out) {
  validate(config);
  Writer w(out);
  Bundle bundle;
  bundle.manifest = {{"config", to_json(config)}};

  if (config.kind == ScenarioKind::screen_validate) {
    bundle.metrics = run_screen_validate(config, w);
    const auto& t = config.turbulence;
    bundle.manifest["derived"] = {
        {"r0", t.r0()},
        {"r0_at_808nm", fried_parameter(808e-9, t.cn2, t.link_length) / t.scale_down},
        {"r0_at_pump_wavelength", fried_parameter(config.spdc.pump_wavelength, t.cn2, t.link_length) / t.scale_down},
        {"dx", t.r0() / config.validate.r0_samples},
        {"rho0", isoplanatic_bound(t.r0(), t.wavelength).rho0},
        {"z_max", isoplanatic_bound(t.r0(), t.wavelength).z_max},
        {"kernel_isa", std::string(kernels::isa_name(kernels::active().isa))}};
  } else {
    const Bench bench(config);
    bundle.manifest["derived"] = bench.derived();
    switch (config.kind) {
      case ScenarioKind::speckle:
        bundle.metrics = run_speckle(bench, w);
        break;
      case ScenarioKind::optimize_static:
        bundle.metrics = static_metrics(bench, optimise_static(bench), w);
        break;
      case ScenarioKind::higher_mode: {
        const StaticRun run = optimise_static(bench);
        bundle.metrics = run_higher_mode(bench, run, w);
        bundle.metrics["static"] = static_metrics(bench, run, w);
        break;
      }
      case ScenarioKind::optimize_dynamic:
        bundle.metrics = run_dynamic(bench, w);
        break;
      case ScenarioKind::screen_validate:
        break;
    }
  }
  bundle.metrics["scenario"] = scenario_name(config.kind);
  if (w.enabled()) {
    io::write_json(w.dir() / "manifest.json", bundle.manifest);
    io::write_json(w.dir() / "metrics.json", bundle.metrics);
    w.add({"manifest.json", "metrics.json"});
  }
  bundle.files = w.files();
  bundle.manifest["files"] = bundle.files;
  if (w.enabled()) io::write_json(w.dir() / "manifest.json", bundle.manifest);
  return bundle;
}

}  // namespace pumpshape

#pragma once

// From ideal patterns to measurement records: fibre-coupled scanning detector
// with a flat accidental background, and a pixelated camera. Both are linear
// observation operators on the pattern samples followed by Poisson sampling.

#include <cstdint>
#include <utility>
#include <vector>

#include "pumpshape/field_optics.hpp"

namespace pumpshape {

struct ScanGeometry {
  std::size_t points = 99;  ///< per side
  double step = 25e-6;
  double center_x = 0.0;
  double center_y = 0.0;

  double x(std::size_t col) const noexcept;
  double y(std::size_t row) const noexcept;
};

struct DetectionConfig {
  ScanGeometry scan;
  double collection_diameter = 50e-6;
  double exposure_per_point = 30.0;  ///< s
  double accidental_rate = 0.14;     ///< counts/s
  double camera_pixel = 4.8e-6;
  std::size_t camera_pixels = 256;   ///< per side
  double camera_exposure = 200e-6;   ///< s
  double camera_gain = 1.0;          ///< counts per intensity unit per s
  bool camera_shot_noise = true;
  double coincidence_window = 4e-9;  ///< metadata only
  std::uint64_t seed = 1;

  void validate() const;
};

/// Counts on a square detector grid. Raw maps hold integral values; once the
/// accidental background is subtracted they may go slightly negative.
struct CountMap {
  Grid<double> counts;
  double step = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double exposure = 0.0;
  bool accidental_corrected = false;
  double accidental_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return counts.size(); }
  double x(std::size_t col) const noexcept;
  double y(std::size_t row) const noexcept;
  /// counts / exposure; throws DomainError for zero exposure.
  Grid<double> rates() const;
};

/// Sparse linear map from pattern samples to detector values.
class Observation {
 public:
  using Term = std::pair<std::uint32_t, double>;

  Observation() = default;
  Observation(std::size_t side, std::size_t pattern_size, std::vector<std::vector<Term>> rows);

  std::size_t side() const noexcept { return side_; }
  std::size_t pattern_size() const noexcept { return pattern_size_; }
  const std::vector<Term>& terms(std::size_t pixel) const { return rows_[pixel]; }

  Grid<double> apply(const Grid<double>& pattern) const;
  /// Pattern-sample weights of sum_{pixel in mask} value(pixel).
  std::vector<Term> collapse(const Grid<std::uint8_t>& mask) const;

 private:
  std::size_t side_ = 0;
  std::size_t pattern_size_ = 0;
  std::vector<std::vector<Term>> rows_;
};

/// Integral of the bilinear pattern density over a disc of `diameter` around
/// every scan point. The quadrature grid has a fixed spacing of pitch/8
/// anchored at the scan point, so a larger disc only adds non-negative terms.
Observation scan_observation(const FarFieldMap& pattern, const ScanGeometry& scan,
                             double diameter);

/// Integral over square camera pixels, camera centred on the pattern centre.
Observation camera_observation(const FarFieldMap& pattern, double pixel, std::size_t pixels);

/// Scale making the brightest aperture-integrated scan point of `reference`
/// equal `peak_rate`.
double rate_scale(const FarFieldMap& reference, const DetectionConfig& cfg, double peak_rate);

/// Multiply a pattern by a scalar (rate calibration).
FarFieldMap scaled(FarFieldMap map, double factor);

/// Noise-free coincidence rate per scan point (pattern in rate units),
/// without the accidental background.
Grid<double> expected_scan_rates(const FarFieldMap& pattern, const DetectionConfig& cfg);

/// Poisson-sampled scan: counts ~ Poisson((aperture rate + accidental) exposure)
/// with a generator derived from (cfg.seed, point index).
CountMap scan_coincidences(const FarFieldMap& pattern, const DetectionConfig& cfg);
/// Same, reusing an operator built by scan_observation for this geometry.
CountMap scan_coincidences(const FarFieldMap& pattern, const DetectionConfig& cfg,
                           const Observation& scan);

/// Subtract accidental_rate * exposure from every point. Throws StateError if
/// already corrected.
CountMap subtract_accidentals(CountMap map, const DetectionConfig& cfg);

/// Camera frame: pixel-integrated intensity times gain and exposure, Poisson
/// sampled when cfg.camera_shot_noise is set.
CountMap camera_capture(const FarFieldMap& pattern, const DetectionConfig& cfg);
CountMap camera_capture(const FarFieldMap& pattern, const DetectionConfig& cfg,
                        const Observation& camera);

/// Seed for the `index`-th independent stream under `seed` (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace pumpshape

#include "pumpshape/spdc_model.hpp"

#include <cmath>

namespace pumpshape {

void SpdcConfig::validate() const {
  if (!(pump_wavelength > 0.0)) throw DomainError("pump wavelength must be positive");
  if (pair_wavelength != 2.0 * pump_wavelength) {
    throw DomainError("pair wavelength must be exactly twice the pump wavelength");
  }
  if (!(beta > 0.0 && beta <= 1.2)) throw DomainError("beta must lie in (0, 1.2]");
  if (!(peak_coincidence_rate > 0.0)) throw DomainError("peak coincidence rate must be positive");
  if (!(singles_peak_rate > 0.0) || !(singles_width > 0.0)) {
    throw DomainError("singles envelope must have positive peak and width");
  }
}

ComplexField effective_pair_field(const ComplexField& pump0, const PhaseScreen& control,
                                  const PhaseScreen& atmosphere, double beta) {
  return apply_phase(apply_phase(pump0, control, 1.0), atmosphere, beta);
}

FarFieldMap coincidence_pattern(const ComplexField& effective, double focal_length,
                                const SpdcConfig& config, std::size_t pad) {
  FarFieldMap map = far_field(effective, focal_length, pad);
  map.pitch *= config.pair_wavelength / effective.wavelength;
  map.wavelength = config.pair_wavelength;
  const double half = static_cast<double>(map.size() / 2) * map.pitch;
  if (std::abs(config.idler_x) > half || std::abs(config.idler_y) > half) {
    throw RangeError("idler position outside the computed far-field plane");
  }
  map.center_x = -config.idler_x;
  map.center_y = -config.idler_y;
  return map;
}

FarFieldMap singles_envelope(const SpdcConfig& config, double slm1_transmission, std::size_t n,
                             double pitch, double center_x, double center_y) {
  if (!(slm1_transmission > 0.0 && slm1_transmission <= 1.0)) {
    throw DomainError("transmission must lie in (0, 1]");
  }
  FarFieldMap map;
  map.intensity = Grid<double>(n);
  map.pitch = pitch;
  map.wavelength = config.pair_wavelength;
  map.center_x = center_x;
  map.center_y = center_y;
  const double inv_w2 = 1.0 / (config.singles_width * config.singles_width);
  for (std::size_t r = 0; r < n; ++r) {
    const double dy = map.y(r) - center_y;
    for (std::size_t c = 0; c < n; ++c) {
      const double dxx = map.x(c) - center_x;
      map.intensity(r, c) =
          slm1_transmission * config.singles_peak_rate * std::exp(-(dxx * dxx + dy * dy) * inv_w2);
    }
  }
  return map;
}

}  // namespace pumpshape

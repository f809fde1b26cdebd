#pragma once

// Thin-crystal photon-pair model. The pump's angular spectrum is transferred to
// the pairs, so with the idler detector fixed the coincidence rate over the
// signal detector is the far field of an "effective" pump-plane field,
// relabelled to pair-wavelength detector coordinates.

#include "pumpshape/field_optics.hpp"

namespace pumpshape {

struct SpdcConfig {
  double pump_wavelength = 404e-9;
  double pair_wavelength = 808e-9;
  /// Phase picked up by the pair per radian of pump phase on the screen.
  double beta = 1.0;
  double idler_x = 0.0;
  double idler_y = 0.0;
  /// Unscattered coincidence rate at the focus, counts/s. Invented default.
  double peak_coincidence_rate = 5.0;
  /// Singles envelope over the scan window.
  double singles_peak_rate = 6500.0;
  double singles_width = 2.02e-3;
  double schmidt_number = 680.0;  ///< metadata only

  void validate() const;
};

/// pump0 exp(i control) exp(i beta atmosphere). The control phase is imprinted
/// on the pump before the crystal; the pair crosses the screen at twice the
/// wavelength and so sees it scaled by beta.
ComplexField effective_pair_field(const ComplexField& pump0, const PhaseScreen& control,
                                  const PhaseScreen& atmosphere, double beta);

/// Coincidence pattern over the scanning (signal) detector: the far field of
/// the effective field on the pump grid, with detector pitch evaluated at the
/// pair wavelength and centred at -idler. Integrates to effective.power().
FarFieldMap coincidence_pattern(const ComplexField& effective, double focal_length,
                                const SpdcConfig& config, std::size_t pad = 1);

/// Singles rate over an n x n scan grid: a broad Gaussian, independent of
/// every phase, scaled by the control modulator's transmission.
FarFieldMap singles_envelope(const SpdcConfig& config, double slm1_transmission, std::size_t n,
                             double pitch, double center_x, double center_y);

}  // namespace pumpshape

#pragma once

// Von-Karman phase screens for a single-screen turbulence emulator, plus the
// atmospheric bookkeeping (Fried parameter, coherence radius, dispersion of
// air) that goes with them. All lengths are SI metres, phases are radians at
// the pump wavelength.

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pumpshape/grid.hpp"

namespace pumpshape {

using cplx = std::complex<double>;

/// r0 = (0.4229 (2 pi / lambda)^2 z Cn2)^(-3/5).
double fried_parameter(double wavelength, double cn2, double link_length);

/// Phase power spectral density in rad^2 m^2 at wavenumber (kx, ky) in rad/m:
/// 0.49 r0^(-5/3) (k^2 + ko^2)^(-11/6) exp(-k^2 / km^2), ko = 2 pi / l_o,
/// km = 5.92 / l_i.
double von_karman_psd(double kx, double ky, double r0, double outer_scale, double inner_scale);

/// 6.88 (r / r0)^(5/3)
double kolmogorov_structure_function(double separation, double r0);

struct TurbulenceParams {
  double cn2 = 1e-15;           ///< m^(-2/3)
  double link_length = 1000.0;  ///< z, m
  double wavelength = 808e-9;   ///< wavelength at which r0 is quoted, m
  double outer_scale = 10.0;    ///< l_o, m
  double inner_scale = 5e-3;    ///< l_i, m
  /// Lab emulation shrinks every transverse length by this factor; r0 is
  /// divided by it, l_o and l_i are given already scaled.
  double scale_down = 1.0;

  void validate() const;
  double r0() const;
  double outer_wavenumber() const;
  double inner_wavenumber() const;
};

struct ScreenRecipe {
  TurbulenceParams params;
  std::size_t n = 0;
  double dx = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct PhaseScreen {
  Grid<double> phase;
  double dx = 0.0;
  ScreenRecipe recipe;
  /// Top-left corner of this grid inside the generated grid (non-zero for
  /// frozen-flow windows).
  std::size_t origin_row = 0;
  std::size_t origin_col = 0;

  std::size_t size() const noexcept { return phase.size(); }
};

/// Signed angular frequency of FFT index i on an n-point grid of pitch dx.
double fft_wavenumber(std::size_t i, std::size_t n, double dx);

/// Random spectral samples sqrt(Phi dk^2) (A + iB) / sqrt(2) in FFT order,
/// zero at the piston sample. A and B are drawn row-major, A before B.
Grid<cplx> spectral_samples(const TurbulenceParams& params, std::size_t n, double dx,
                            std::uint64_t seed);

/// sqrt(2) Re(IDFT(spectrum)), the factor restoring the variance lost by
/// keeping one quadrature.
Grid<double> synthesize_phase(Grid<cplx> spectrum);

/// Warnings for a grid that under-resolves the inner scale or is too small
/// for the outer scale / r0.
std::vector<std::string> screen_warnings(const TurbulenceParams& params, std::size_t n, double dx);

/// Deterministic in (params, n, dx, seed).
PhaseScreen generate_screen(const TurbulenceParams& params, std::size_t n, double dx,
                            std::uint64_t seed);

/// Expected axis-aligned structure function of generate_screen at a
/// separation of `lag` samples, summed over the discrete sampled spectrum.
double sampled_band_structure_function(const TurbulenceParams& params, std::size_t n, double dx,
                                       std::size_t lag);

/// Zero-filled screen with the given grid; used for "no atmosphere" runs.
PhaseScreen flat_screen(std::size_t n, double dx, double value = 0.0);

struct Offset {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Rigid translation of a large master screen under a fixed window.
struct FrozenFlow {
  PhaseScreen master;
  std::size_t window = 0;
  std::vector<Offset> schedule;
};

/// `steps` offsets moving `cols_per_step` columns each, starting at `start`.
std::vector<Offset> linear_schedule(std::size_t steps, std::size_t cols_per_step,
                                    Offset start = {});

FrozenFlow make_frozen_flow(const TurbulenceParams& params, std::size_t master_n,
                            std::size_t window, double dx, std::uint64_t seed,
                            std::vector<Offset> schedule);

/// Window at schedule[step]. Throws RangeError if the step or the window is
/// out of bounds.
PhaseScreen frozen_view(const FrozenFlow& flow, std::size_t step);

/// Refractive index of air; pressure in mbar, temperature in K, wavelength in um.
double air_refractive_index(double pressure_mbar, double temperature_k, double wavelength_um);

struct IsoplanaticBound {
  double rho0;   ///< coherence radius r0 / 2.1
  double z_max;  ///< rho0^2 / lambda
};

IsoplanaticBound isoplanatic_bound(double r0, double wavelength);

}  // namespace pumpshape

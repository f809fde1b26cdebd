#pragma once

// Sampled scalar fields on the shared control/crystal/screen plane and the
// single-lens far-field transform. The relay optics between the planes are
// ideal imagers and do not appear; one pitch describes the shared plane.

#include <complex>
#include <cstddef>
#include <string_view>

#include "pumpshape/grid.hpp"
#include "pumpshape/turbulence.hpp"

namespace pumpshape {

enum class Plane { control, crystal, screen, far_field };

std::string_view plane_name(Plane p) noexcept;

struct ComplexField {
  Grid<cplx> amplitude;
  double dx = 0.0;
  double wavelength = 0.0;
  Plane plane = Plane::screen;

  std::size_t size() const noexcept { return amplitude.size(); }
  /// sum |a|^2 dx^2
  double power() const;
};

/// Far-field intensity on a square detector grid. Sample (row, col) sits at
/// x = center_x + (col - n/2) pitch, y = center_y + (row - n/2) pitch.
struct FarFieldMap {
  Grid<double> intensity;
  double pitch = 0.0;
  double focal_length = 0.0;
  double wavelength = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;

  std::size_t size() const noexcept { return intensity.size(); }
  double x(std::size_t col) const noexcept;
  double y(std::size_t row) const noexcept;
  /// Fractional (row, col) of a physical coordinate.
  double col_of(double x) const noexcept;
  double row_of(double y) const noexcept;
  /// Sum of all samples; equals the input power for far_field output.
  double total() const;
};

/// exp(-r^2 / w^2), unit peak at sample n/2. Requires waist >= 4 dx.
ComplexField gaussian_beam(double waist, std::size_t n, double dx, double wavelength,
                           Plane plane = Plane::screen);

/// The phase actually imprinted by a phase-only modulator: phi mod 2 pi in [0, 2 pi).
double wrap_phase(double phi) noexcept;

/// a * exp(i factor wrap(phi)). The screen is displayed wrapped, so a
/// chromatic factor scales the wrapped phase, not the unwrapped one.
ComplexField apply_phase(ComplexField field, const PhaseScreen& screen, double chromatic_factor);
/// As above with a raw phase grid.
ComplexField apply_phase(ComplexField field, const Grid<double>& phase, double chromatic_factor);

/// Lens far field: centred DFT of the field zero-padded to pad*n samples,
/// normalised so that total() equals field.power(). Detector pitch is
/// f lambda / (pad n dx).
FarFieldMap far_field(const ComplexField& field, double focal_length, std::size_t pad = 1);

/// Bilinear value at a physical coordinate; zero outside the sampled square.
double sample_bilinear(const FarFieldMap& map, double x, double y) noexcept;

/// Bilinear resampling of `map` onto a new grid.
FarFieldMap resample_pattern(const FarFieldMap& map, std::size_t n, double pitch, double center_x,
                             double center_y);

/// Magnify the pattern by `factor` about its centre sample, keeping the grid.
FarFieldMap rescale_pattern(const FarFieldMap& map, double factor);

}  // namespace pumpshape

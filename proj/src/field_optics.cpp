#include "pumpshape/field_optics.hpp"

#include <cmath>
#include <numbers>

#include "pumpshape/fft.hpp"
#include "pumpshape/kernels.hpp"

namespace pumpshape {

std::string_view plane_name(Plane p) noexcept {
  switch (p) {
    case Plane::control: return "control";
    case Plane::crystal: return "crystal";
    case Plane::screen: return "screen";
    case Plane::far_field: return "far-field";
  }
  return "unknown";
}

double ComplexField::power() const {
  Grid<double> i2(amplitude.size());
  kernels::active().abs2(amplitude.values(), i2.values());
  double s = 0.0;
  for (double v : i2.values()) s += v;
  return s * dx * dx;
}

double FarFieldMap::x(std::size_t col) const noexcept {
  return center_x + (static_cast<double>(col) - static_cast<double>(size() / 2)) * pitch;
}
double FarFieldMap::y(std::size_t row) const noexcept {
  return center_y + (static_cast<double>(row) - static_cast<double>(size() / 2)) * pitch;
}
double FarFieldMap::col_of(double xx) const noexcept {
  return (xx - center_x) / pitch + static_cast<double>(size() / 2);
}
double FarFieldMap::row_of(double yy) const noexcept {
  return (yy - center_y) / pitch + static_cast<double>(size() / 2);
}
double FarFieldMap::total() const {
  double s = 0.0;
  for (double v : intensity.values()) s += v;
  return s;
}

ComplexField gaussian_beam(double waist, std::size_t n, double dx, double wavelength, Plane plane) {
  if (!(dx > 0.0) || !(wavelength > 0.0)) throw DomainError("beam grid pitch and wavelength must be positive");
  if (!(waist >= 4.0 * dx)) throw DomainError("beam waist under-resolved: needs at least 4 samples");
  ComplexField f{Grid<cplx>(n), dx, wavelength, plane};
  const double c = static_cast<double>(n / 2);
  const double inv_w2 = 1.0 / (waist * waist);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = (static_cast<double>(r) - c) * dx;
    for (std::size_t col = 0; col < n; ++col) {
      const double x = (static_cast<double>(col) - c) * dx;
      f.amplitude(r, col) = std::exp(-(x * x + y * y) * inv_w2);
    }
  }
  return f;
}

double wrap_phase(double phi) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(phi, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w = 0.0;
  return w;
}

ComplexField apply_phase(ComplexField field, const Grid<double>& phase, double chromatic_factor) {
  require_congruent(field.amplitude, phase, "apply_phase");
  if (chromatic_factor == 0.0) return field;
  Grid<cplx> phasor(phase.size());
  for (std::size_t i = 0; i < phase.count(); ++i) {
    const double p = chromatic_factor * wrap_phase(phase[i]);
    phasor[i] = {std::cos(p), std::sin(p)};
  }
  kernels::active().cmul(field.amplitude.values(), phasor.values());
  return field;
}

ComplexField apply_phase(ComplexField field, const PhaseScreen& screen, double chromatic_factor) {
  if (std::abs(screen.dx - field.dx) > 1e-12 * field.dx) {
    throw ShapeError("apply_phase: screen pitch differs from field pitch");
  }
  return apply_phase(std::move(field), screen.phase, chromatic_factor);
}

FarFieldMap far_field(const ComplexField& field, double focal_length, std::size_t pad) {
  const std::size_t n = field.size();
  if (!is_power_of_two(n)) throw DomainError("far_field: grid size must be a power of two");
  if (!is_power_of_two(pad)) throw DomainError("far_field: padding must be a power of two");
  if (!(focal_length > 0.0)) throw DomainError("far_field: focal length must be positive");

  const std::size_t m = pad * n;
  const std::size_t off = (m - n) / 2;
  Grid<cplx> work(m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = field.amplitude.row(r);
    std::copy(src.begin(), src.end(), work.row(r + off).begin() + static_cast<std::ptrdiff_t>(off));
  }
  fft::centered_forward(work);

  FarFieldMap out;
  out.intensity = Grid<double>(m);
  kernels::active().abs2(work.values(), out.intensity.values());
  const double scale = field.dx * field.dx / (static_cast<double>(m) * static_cast<double>(m));
  for (auto& v : out.intensity.values()) v *= scale;
  out.pitch = focal_length * field.wavelength / (static_cast<double>(m) * field.dx);
  out.focal_length = focal_length;
  out.wavelength = field.wavelength;
  return out;
}

namespace {

double bilinear_at_index(const Grid<double>& g, double row, double col) noexcept {
  const auto n = static_cast<double>(g.size());
  if (!(row >= 0.0) || !(col >= 0.0) || row > n - 1.0 || col > n - 1.0) return 0.0;
  const auto r0 = static_cast<std::size_t>(row);
  const auto c0 = static_cast<std::size_t>(col);
  const std::size_t r1 = std::min(r0 + 1, g.size() - 1);
  const std::size_t c1 = std::min(c0 + 1, g.size() - 1);
  const double fr = row - static_cast<double>(r0);
  const double fc = col - static_cast<double>(c0);
  return (1.0 - fr) * ((1.0 - fc) * g(r0, c0) + fc * g(r0, c1)) +
         fr * ((1.0 - fc) * g(r1, c0) + fc * g(r1, c1));
}

}  // namespace

double sample_bilinear(const FarFieldMap& map, double x, double y) noexcept {
  return bilinear_at_index(map.intensity, map.row_of(y), map.col_of(x));
}

FarFieldMap resample_pattern(const FarFieldMap& map, std::size_t n, double pitch, double center_x,
                             double center_y) {
  FarFieldMap out = map;
  out.intensity = Grid<double>(n);
  out.pitch = pitch;
  out.center_x = center_x;
  out.center_y = center_y;
  for (std::size_t r = 0; r < n; ++r) {
    const double y = out.y(r);
    for (std::size_t c = 0; c < n; ++c) out.intensity(r, c) = sample_bilinear(map, out.x(c), y);
  }
  return out;
}

FarFieldMap rescale_pattern(const FarFieldMap& map, double factor) {
  if (!(factor > 0.0)) throw DomainError("rescale factor must be positive");
  FarFieldMap out = map;
  if (factor == 1.0) return out;
  const std::size_t n = map.size();
  const auto c = static_cast<double>(n / 2);
  for (std::size_t r = 0; r < n; ++r) {
    const double sr = c + (static_cast<double>(r) - c) / factor;
    for (std::size_t col = 0; col < n; ++col) {
      const double sc = c + (static_cast<double>(col) - c) / factor;
      out.intensity(r, col) = bilinear_at_index(map.intensity, sr, sc);
    }
  }
  return out;
}

}  // namespace pumpshape

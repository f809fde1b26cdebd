#include "pumpshape/turbulence.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "pumpshape/fft.hpp"
#include "pumpshape/kernels.hpp"

namespace pumpshape {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive");
}

}  // namespace

double fried_parameter(double wavelength, double cn2, double link_length) {
  require_positive(wavelength, "wavelength");
  require_positive(cn2, "cn2");
  require_positive(link_length, "link length");
  const double k = kTwoPi / wavelength;
  return std::pow(0.4229 * k * k * link_length * cn2, -3.0 / 5.0);
}

double von_karman_psd(double kx, double ky, double r0, double outer_scale, double inner_scale) {
  require_positive(r0, "r0");
  require_positive(outer_scale, "outer scale");
  require_positive(inner_scale, "inner scale");
  const double ko = kTwoPi / outer_scale;
  const double km = 5.92 / inner_scale;
  const double k2 = kx * kx + ky * ky;
  return 0.49 * std::pow(r0, -5.0 / 3.0) * std::pow(k2 + ko * ko, -11.0 / 6.0) *
         std::exp(-k2 / (km * km));
}

double kolmogorov_structure_function(double separation, double r0) {
  return 6.88 * std::pow(separation / r0, 5.0 / 3.0);
}

void TurbulenceParams::validate() const {
  require_positive(cn2, "cn2");
  require_positive(link_length, "link length");
  require_positive(wavelength, "wavelength");
  require_positive(outer_scale, "outer scale");
  require_positive(inner_scale, "inner scale");
  require_positive(scale_down, "scale-down factor");
  if (!(inner_scale < outer_scale)) throw DomainError("inner scale must be below outer scale");
  if (!(outer_wavenumber() < inner_wavenumber())) {
    throw DomainError("outer-scale wavenumber must be below the inner-scale cutoff");
  }
}

double TurbulenceParams::r0() const {
  return fried_parameter(wavelength, cn2, link_length) / scale_down;
}
double TurbulenceParams::outer_wavenumber() const { return kTwoPi / outer_scale; }
double TurbulenceParams::inner_wavenumber() const { return 5.92 / inner_scale; }

double fft_wavenumber(std::size_t i, std::size_t n, double dx) {
  const auto si = static_cast<long long>(i);
  const auto sn = static_cast<long long>(n);
  const long long f = si < (sn + 1) / 2 ? si : si - sn;
  return kTwoPi * static_cast<double>(f) / (static_cast<double>(n) * dx);
}

namespace {

Grid<double> spectral_weights(const TurbulenceParams& params, std::size_t n, double dx) {
  const double r0 = params.r0();
  const double dk = kTwoPi / (static_cast<double>(n) * dx);
  Grid<double> w(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = fft_wavenumber(r, n, dx);
    for (std::size_t c = 0; c < n; ++c) {
      const double kx = fft_wavenumber(c, n, dx);
      w(r, c) = von_karman_psd(kx, ky, r0, params.outer_scale, params.inner_scale) * dk * dk;
    }
  }
  w(0, 0) = 0.0;
  return w;
}

void check_grid(const TurbulenceParams& params, std::size_t n, double dx) {
  params.validate();
  if (!is_power_of_two(n)) throw DomainError("screen size must be a power of two");
  require_positive(dx, "grid pitch");
}

}  // namespace

Grid<cplx> spectral_samples(const TurbulenceParams& params, std::size_t n, double dx,
                            std::uint64_t seed) {
  check_grid(params, n, dx);
  Grid<double> amp = spectral_weights(params, n, dx);
  for (auto& v : amp.values()) v = std::sqrt(v);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Grid<cplx> spec(n);
  for (auto& s : spec.values()) {
    const double a = normal(rng);
    const double b = normal(rng);
    s = {a * inv_sqrt2, b * inv_sqrt2};
  }
  kernels::active().scale_by_real(spec.values(), amp.values());
  return spec;
}

Grid<double> synthesize_phase(Grid<cplx> spectrum) {
  fft::inverse(spectrum);
  Grid<double> phase(spectrum.size());
  for (std::size_t i = 0; i < phase.count(); ++i) {
    phase[i] = std::numbers::sqrt2 * spectrum[i].real();
  }
  return phase;
}

std::vector<std::string> screen_warnings(const TurbulenceParams& params, std::size_t n, double dx) {
  std::vector<std::string> w;
  const double extent = static_cast<double>(n) * dx;
  if (dx > params.inner_scale) w.emplace_back("inner scale under-resolved: dx exceeds l_i");
  if (extent < params.outer_scale) {
    w.emplace_back("grid extent below outer scale: low-frequency content truncated");
  }
  if (extent < 4.0 * params.r0()) w.emplace_back("grid extent below 4 r0");
  return w;
}

PhaseScreen generate_screen(const TurbulenceParams& params, std::size_t n, double dx,
                            std::uint64_t seed) {
  PhaseScreen s;
  s.phase = synthesize_phase(spectral_samples(params, n, dx, seed));
  s.dx = dx;
  s.recipe = ScreenRecipe{params, n, dx, seed, screen_warnings(params, n, dx)};
  return s;
}

double sampled_band_structure_function(const TurbulenceParams& params, std::size_t n, double dx,
                                       std::size_t lag) {
  check_grid(params, n, dx);
  const Grid<double> w = spectral_weights(params, n, dx);
  const double sep = static_cast<double>(lag) * dx;
  double d = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      d += w(r, c) * (1.0 - std::cos(fft_wavenumber(c, n, dx) * sep));
    }
  }
  return 2.0 * d;
}

PhaseScreen flat_screen(std::size_t n, double dx, double value) {
  PhaseScreen s;
  s.phase = Grid<double>(n, value);
  s.dx = dx;
  s.recipe.n = n;
  s.recipe.dx = dx;
  return s;
}

std::vector<Offset> linear_schedule(std::size_t steps, std::size_t cols_per_step, Offset start) {
  std::vector<Offset> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back({start.row, start.col + i * cols_per_step});
  return out;
}

FrozenFlow make_frozen_flow(const TurbulenceParams& params, std::size_t master_n,
                            std::size_t window, double dx, std::uint64_t seed,
                            std::vector<Offset> schedule) {
  if (!(window < master_n)) throw DomainError("frozen-flow window must be smaller than the master");
  FrozenFlow flow{generate_screen(params, master_n, dx, seed), window, std::move(schedule)};
  for (const auto& o : flow.schedule) {
    if (o.row + window > master_n || o.col + window > master_n) {
      throw RangeError("frozen-flow schedule leaves the master screen");
    }
  }
  return flow;
}

PhaseScreen frozen_view(const FrozenFlow& flow, std::size_t step) {
  if (step >= flow.schedule.size()) throw RangeError("frozen-flow step beyond schedule");
  const Offset o = flow.schedule[step];
  const std::size_t m = flow.master.size();
  if (o.row + flow.window > m || o.col + flow.window > m) {
    throw RangeError("frozen-flow window exceeds master screen");
  }
  PhaseScreen v;
  v.phase = Grid<double>(flow.window);
  for (std::size_t r = 0; r < flow.window; ++r) {
    const auto src = flow.master.phase.row(o.row + r).subspan(o.col, flow.window);
    std::copy(src.begin(), src.end(), v.phase.row(r).begin());
  }
  v.dx = flow.master.dx;
  v.recipe = flow.master.recipe;
  v.origin_row = o.row;
  v.origin_col = o.col;
  return v;
}

double air_refractive_index(double pressure_mbar, double temperature_k, double wavelength_um) {
  require_positive(pressure_mbar, "pressure");
  require_positive(temperature_k, "temperature");
  require_positive(wavelength_um, "wavelength");
  return 1.0 + 77.6 * (1.0 + 7.52e-3 / (wavelength_um * wavelength_um)) *
                   (pressure_mbar / temperature_k) * 1e-6;
}

IsoplanaticBound isoplanatic_bound(double r0, double wavelength) {
  require_positive(r0, "r0");
  require_positive(wavelength, "wavelength");
  const double rho0 = r0 / 2.1;
  return {rho0, rho0 * rho0 / wavelength};
}

}  // namespace pumpshape

#include <cstddef>

#include "pumpshape/kernels.hpp"

namespace pumpshape::kernels {
namespace {

void abs2(std::span<const cplx> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double re = in[i].real();
    const double im = in[i].imag();
    out[i] = re * re + im * im;
  }
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br - ai * bi;
    im += ar * bi + ai * br;
  }
  return {re, im};
}

void scale_by_real(std::span<cplx> z, std::span<const double> w) {
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = {z[i].real() * w[i], z[i].imag() * w[i]};
}

void cmul(std::span<cplx> z, std::span<const cplx> w) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zr = z[i].real(), zi = z[i].imag();
    const double wr = w[i].real(), wi = w[i].imag();
    z[i] = {zr * wr - zi * wi, zr * wi + zi * wr};
  }
}

constexpr Table kScalar{Isa::scalar, abs2, sum_sq_diff, dot, cdot, scale_by_real, cmul};

}  // namespace

const Table& scalar_table() noexcept { return kScalar; }

}  // namespace pumpshape::kernels

#include <immintrin.h>

#include <cstddef>

#include "pumpshape/kernels.hpp"

namespace pumpshape::kernels {
namespace {

inline const double* as_doubles(const cplx* p) { return reinterpret_cast<const double*>(p); }
inline double* as_doubles(cplx* p) { return reinterpret_cast<double*>(p); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void abs2(std::span<const cplx> in, std::span<double> out) {
  const std::size_t n = in.size();
  const double* src = as_doubles(in.data());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(src + 2 * i);
    const __m256d b = _mm256_loadu_pd(src + 2 * i + 4);
    // hadd interleaves lanes: [z0, z2, z1, z3]
    const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    _mm256_storeu_pd(out.data() + i, _mm256_permute4x64_pd(h, 0b11011000));
  }
  for (; i < n; ++i) {
    const double re = in[i].real(), im = in[i].imag();
    out[i] = re * re + im * im;
  }
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                           acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
  const std::size_t n = a.size();
  const double* pa = as_doubles(a.data());
  const double* pb = as_doubles(b.data());
  __m256d same = _mm256_setzero_pd();   // [ar*br, ai*bi, ...]
  __m256d cross = _mm256_setzero_pd();  // [ar*bi, ai*br, ...]
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    same = _mm256_fmadd_pd(va, vb, same);
    cross = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0b0101), cross);
  }
  alignas(32) double s[4];
  _mm256_store_pd(s, same);
  double re = (s[0] + s[2]) - (s[1] + s[3]);
  double im = hsum(cross);
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br - ai * bi;
    im += ar * bi + ai * br;
  }
  return {re, im};
}

void scale_by_real(std::span<cplx> z, std::span<const double> w) {
  const std::size_t n = z.size();
  double* pz = as_doubles(z.data());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d ww =
        _mm256_permute4x64_pd(_mm256_castpd128_pd256(_mm_loadu_pd(w.data() + i)), 0b01010000);
    _mm256_storeu_pd(pz + 2 * i, _mm256_mul_pd(_mm256_loadu_pd(pz + 2 * i), ww));
  }
  for (; i < n; ++i) z[i] = {z[i].real() * w[i], z[i].imag() * w[i]};
}

void cmul(std::span<cplx> z, std::span<const cplx> w) {
  const std::size_t n = z.size();
  double* pz = as_doubles(z.data());
  const double* pw = as_doubles(w.data());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vz = _mm256_loadu_pd(pz + 2 * i);
    const __m256d vw = _mm256_loadu_pd(pw + 2 * i);
    const __m256d wr = _mm256_movedup_pd(vw);
    const __m256d wi = _mm256_permute_pd(vw, 0b1111);
    const __m256d zs = _mm256_permute_pd(vz, 0b0101);
    _mm256_storeu_pd(pz + 2 * i, _mm256_addsub_pd(_mm256_mul_pd(vz, wr), _mm256_mul_pd(zs, wi)));
  }
  for (; i < n; ++i) {
    const double zr = z[i].real(), zi = z[i].imag();
    const double wr = w[i].real(), wi = w[i].imag();
    z[i] = {zr * wr - zi * wi, zr * wi + zi * wr};
  }
}

constexpr Table kAvx2{Isa::avx2, abs2, sum_sq_diff, dot, cdot, scale_by_real, cmul};

}  // namespace

const Table* avx2_table_impl() noexcept { return &kAvx2; }

}  // namespace pumpshape::kernels

#pragma once

// Data-parallel inner loops shared by the optics pipeline. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2 variant. The
// variant is picked once at startup from CPUID; PUMPSHAPE_ISA=scalar forces
// the reference path.

#include <complex>
#include <span>
#include <string_view>

namespace pumpshape::kernels {

using cplx = std::complex<double>;

enum class Isa { scalar, avx2 };

struct Table {
  Isa isa;
  /// out[i] = |in[i]|^2
  void (*abs2)(std::span<const cplx> in, std::span<double> out);
  /// sum_i (a[i] - b[i])^2
  double (*sum_sq_diff)(std::span<const double> a, std::span<const double> b);
  /// sum_i a[i] * b[i]
  double (*dot)(std::span<const double> a, std::span<const double> b);
  /// sum_i a[i] * b[i], complex, no conjugation
  cplx (*cdot)(std::span<const cplx> a, std::span<const cplx> b);
  /// z[i] *= w[i]
  void (*scale_by_real)(std::span<cplx> z, std::span<const double> w);
  /// z[i] *= w[i], complex
  void (*cmul)(std::span<cplx> z, std::span<const cplx> w);
};

const Table& scalar_table() noexcept;
/// Null when the build or the CPU lacks AVX2+FMA.
const Table* avx2_table() noexcept;

/// The table in use. Thread-safe after first call.
const Table& active() noexcept;

/// Override the active variant (tests, benchmarking). Returns false if the
/// requested ISA is unavailable, leaving the selection unchanged.
bool select(Isa isa) noexcept;

std::string_view isa_name(Isa isa) noexcept;

}  // namespace pumpshape::kernels

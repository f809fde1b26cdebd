#pragma once

#include <complex>

#include "pumpshape/grid.hpp"

namespace pumpshape::fft {

using cplx = std::complex<double>;

/// In-place unnormalized 2-D DFT, sum_x a(x) exp(-2 pi i k.x / n).
void forward(Grid<cplx>& g);
/// In-place unnormalized 2-D inverse DFT, sum_k a(k) exp(+2 pi i k.x / n).
void inverse(Grid<cplx>& g);

/// Swap quadrants so index n/2 moves to 0 (ifftshift for even n).
void ifftshift(Grid<cplx>& g);
/// Swap quadrants so index 0 moves to n/2 (fftshift for even n).
void fftshift(Grid<cplx>& g);

/// fftshift(forward(ifftshift(g))): transform with the origin at sample n/2 on
/// both sides.
void centered_forward(Grid<cplx>& g);

}  // namespace pumpshape::fft

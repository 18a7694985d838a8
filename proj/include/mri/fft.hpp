#pragma once

#include "mri/types.hpp"

namespace mri {

/// Centered orthonormal 2D DFT: fftshift(FFT(ifftshift(x))) / sqrt(H*W).
/// DC lands at (H/2, W/2). Unitary: ||fft2c(x)|| == ||x||.
ComplexImage fft2c(const ComplexImage& img);

/// Inverse of fft2c (also its adjoint, since the transform is unitary).
ComplexImage ifft2c(const ComplexImage& ksp);

/// In-place centered orthonormal transforms on a raw H x W buffer.
/// sign = -1 for forward (image -> k-space), +1 for inverse.
void fft2c_raw(cplx* data, int height, int width, int sign);

} // namespace mri

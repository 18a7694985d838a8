#pragma once

#include "mri/types.hpp"

namespace mri {

/// Equispaced Cartesian line mask: every `acceleration`-th phase-encode line
/// starting at `offset`, plus `acs_count` contiguous fully-sampled center lines.
SamplingMask make_mask(int height, int width, int acceleration, int acs_count, int offset = 0);

/// Default ACS width used by the CLI when none is given: 8% of lines at 4x,
/// 4% at 8x, and 8% otherwise (rounded to nearest, at least 2).
int default_acs_count(int height, int acceleration);

/// y_l = mask . fft2c(S_l . x). Unsampled lines are exactly zero.
CoilKSpace apply_forward(const ForwardOperator& op, const ComplexImage& x);

/// E^H y = sum_l conj(S_l) . ifft2c(mask . y_l). Sequential coil sum.
ComplexImage apply_adjoint(const ForwardOperator& op, const CoilKSpace& y);

/// Zero rows of `k` whose phase-encode line is not selected (in place).
void apply_mask(const SamplingMask& mask, CoilKSpace& k);
void apply_mask(const SamplingMask& mask, ComplexImage& k);

/// Deterministic Shepp-Logan style ellipse phantom, magnitude in [0, 1].
/// `smooth_phase` adds a low-order polynomial phase on the support.
ComplexImage make_phantom(int n, bool smooth_phase = false);

/// Phantom with deterministically jittered ellipse parameters; used to build
/// synthetic training sets. variant 0 with no phase equals make_phantom(n).
ComplexImage make_phantom_variant(int n, uint64_t variant, bool smooth_phase = true);

/// Smooth complex Gaussian-profile maps centered around the image border,
/// normalized so sum_l |S_l|^2 == 1 at every pixel.
SensitivitySet make_coil_maps(int n, int coils);

/// Per-pixel sqrt(sum_l |z_l|^2).
RealImage rss(const CoilKSpace& coil_images);

/// Complex dot product <a, b> = sum conj(a_i) b_i.
cplx cdot(const std::vector<cplx>& a, const std::vector<cplx>& b);

/// L2 norm of a complex vector.
double cnorm(const std::vector<cplx>& a);

} // namespace mri

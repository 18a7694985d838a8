#pragma once

#include <array>
#include <vector>

#include "mri/types.hpp"

namespace mri {

enum class WaveletFamily { haar, db2 };

/// One decomposition level: detail subbands at half resolution.
/// Subband naming: first letter = filter along rows (vertical direction),
/// second = along columns. LH = low vertical / high horizontal.
template <typename T>
struct WaveletLevel {
    int height = 0, width = 0; // subband dims
    std::vector<T> lh, hl, hh;
};

/// Multi-level orthonormal periodic 2D DWT coefficients.
template <typename T>
struct WaveletCoeffs {
    int levels = 0;
    int height = 0, width = 0;               // original image dims
    WaveletFamily family = WaveletFamily::haar;
    std::vector<WaveletLevel<T>> detail;      // detail[0] = finest level
    std::vector<T> ll;                        // final approximation
    int ll_height = 0, ll_width = 0;

    size_t coeff_count() const {
        size_t n = ll.size();
        for (const auto& d : detail) n += d.lh.size() + d.hl.size() + d.hh.size();
        return n;
    }
};

using WaveletCoeffsC = WaveletCoeffs<cplx>;
using WaveletCoeffsR = WaveletCoeffs<double>;

/// Orthonormal periodic 2D DWT. Requires height and width divisible by
/// 2^levels. Energy-preserving: ||coeffs|| == ||img||.
template <typename T>
WaveletCoeffs<T> dwt2(const std::vector<T>& img, int height, int width, int levels,
                      WaveletFamily family);

WaveletCoeffsC dwt2(const ComplexImage& img, int levels, WaveletFamily family);

/// Exact inverse of dwt2.
template <typename T>
std::vector<T> idwt2(const WaveletCoeffs<T>& coeffs);

ComplexImage idwt2_image(const WaveletCoeffsC& coeffs);

/// Complex soft-thresholding z -> z * max(|z| - lambda, 0) / |z| on the
/// detail subbands; the LL band passes through unless threshold_ll is set.
template <typename T>
WaveletCoeffs<T> soft_threshold(const WaveletCoeffs<T>& coeffs, double lambda,
                                bool threshold_ll = false);

/// Sum of complex moduli (or absolute values) over all detail subbands,
/// plus the LL band if include_ll. This is ||psi x||_1 for the regularizer.
template <typename T>
double coeff_l1(const WaveletCoeffs<T>& coeffs, bool include_ll = false);

/// Single-level 2D analysis/synthesis on raw buffers; the autodiff wavelet
/// layers call these directly so both paths are bit-identical.
/// Output layout for analysis: four quadrant buffers LL, LH, HL, HH each
/// (h/2) x (w/2), row-major.
template <typename T>
void dwt2_level(const T* img, int h, int w, WaveletFamily family, T* ll, T* lh, T* hl, T* hh);

template <typename T>
void idwt2_level(const T* ll, const T* lh, const T* hl, const T* hh, int h, int w,
                 WaveletFamily family, T* img);

WaveletFamily wavelet_family_from_string(const std::string& name);
std::string to_string(WaveletFamily family);

} // namespace mri

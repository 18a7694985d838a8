#include "mri/sense.hpp"

#include <algorithm>
#include <cmath>

#include "mri/fft.hpp"
#include "mri/kspace.hpp"

namespace mri {

SensitivitySet estimate_maps_lowfreq(const CoilKSpace& y, const SamplingMask& mask, bool apodize) {
    if (y.height != mask.height || y.width != mask.width)
        throw InvalidInputError("estimate_maps_lowfreq: shape mismatch");
    if (mask.acs_count < 2)
        throw InsufficientCalibrationError(
            "estimate_maps_lowfreq: need at least 2 ACS lines, got " +
            std::to_string(mask.acs_count));

    const int L = y.coils, H = y.height, W = y.width;
    const int acs = mask.acs_count;
    const int first = mask.acs_first();

    // Hann profile over the ACS band, offset so the end lines stay nonzero.
    std::vector<double> window(static_cast<size_t>(acs), 1.0);
    if (apodize) {
        for (int j = 0; j < acs; ++j)
            window[j] = 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * (j + 0.5) / acs));
    }

    CoilKSpace lowres(L, H, W);
    for (int l = 0; l < L; ++l) {
        const cplx* src = y.coil(l);
        cplx* dst = lowres.coil(l);
        for (int j = 0; j < acs; ++j) {
            const int r = first + j;
            const cplx* srow = src + static_cast<size_t>(r) * W;
            cplx* drow = dst + static_cast<size_t>(r) * W;
            for (int c = 0; c < W; ++c) drow[c] = srow[c] * window[j];
        }
        fft2c_raw(dst, H, W, +1);
    }

    RealImage r = rss(lowres);
    const double rmax = *std::max_element(r.data.begin(), r.data.end());
    const double eps = kEpsNormFraction * rmax;

    SensitivitySet maps(L, H, W);
    for (size_t i = 0; i < r.numel(); ++i) {
        if (r.data[i] > eps) {
            const double inv = 1.0 / r.data[i];
            for (int l = 0; l < L; ++l)
                maps.coil(l)[i] = lowres.coil(l)[i] * inv;
        } // else: background, maps stay zero
    }
    return maps;
}

std::vector<uint8_t> map_support(const SensitivitySet& maps) {
    CoilKSpace stack(maps.coils, maps.height, maps.width);
    stack.data = maps.data;
    RealImage r = rss(stack);
    const double rmax = *std::max_element(r.data.begin(), r.data.end());
    const double eps = kEpsNormFraction * rmax;
    std::vector<uint8_t> sup(r.numel());
    for (size_t i = 0; i < r.numel(); ++i) sup[i] = r.data[i] > eps ? 1 : 0;
    return sup;
}

} // namespace mri

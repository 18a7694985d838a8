#include "mri/wavelets.hpp"

#include <cmath>
#include <cstring>
#include <type_traits>

namespace mri {
namespace {

struct FilterPair {
    const double* lo;
    const double* hi;
    int len;
};

// Orthonormal analysis filters. Synthesis is the exact transpose.
const double kHaarLo[2] = {0.7071067811865475244008443621048490, 0.7071067811865475244008443621048490};
const double kHaarHi[2] = {0.7071067811865475244008443621048490, -0.7071067811865475244008443621048490};

// Daubechies-4 (two vanishing moments); hi is the alternating flip of lo.
const double kDb2Lo[4] = {0.4829629131445341433748715998644486, 0.8365163037378079055752937809168732,
                          0.2241438680420133810259727622404003, -0.1294095225512603811744494188120241};
const double kDb2Hi[4] = {-0.1294095225512603811744494188120241, -0.2241438680420133810259727622404003,
                          0.8365163037378079055752937809168732, -0.4829629131445341433748715998644486};

FilterPair filters(WaveletFamily family) {
    switch (family) {
        case WaveletFamily::haar: return {kHaarLo, kHaarHi, 2};
        case WaveletFamily::db2: return {kDb2Lo, kDb2Hi, 4};
    }
    throw InvalidConfigError("unknown wavelet family");
}

// Periodic 1D analysis along a strided axis:
//   lo[j] = sum_k h[k] x[(2j+k) mod n],  hi[j] = sum_k g[k] x[(2j+k) mod n]
template <typename T>
void analyze_axis(const T* x, int n, int stride, const FilterPair& f, T* lo, T* hi,
                  int out_stride) {
    const int half = n / 2;
    for (int j = 0; j < half; ++j) {
        T a{}, d{};
        for (int k = 0; k < f.len; ++k) {
            int idx = 2 * j + k;
            if (idx >= n) idx -= n; // filter length <= 4 < n, one wrap suffices
            const T v = x[static_cast<size_t>(idx) * stride];
            a += v * f.lo[k];
            d += v * f.hi[k];
        }
        lo[static_cast<size_t>(j) * out_stride] = a;
        hi[static_cast<size_t>(j) * out_stride] = d;
    }
}

// Transpose of analyze_axis (scatter form).
template <typename T>
void synthesize_axis(const T* lo, const T* hi, int n, int in_stride, const FilterPair& f, T* x,
                     int stride) {
    const int half = n / 2;
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i) * stride] = T{};
    for (int j = 0; j < half; ++j) {
        const T a = lo[static_cast<size_t>(j) * in_stride];
        const T d = hi[static_cast<size_t>(j) * in_stride];
        for (int k = 0; k < f.len; ++k) {
            int idx = 2 * j + k;
            if (idx >= n) idx -= n;
            x[static_cast<size_t>(idx) * stride] += a * f.lo[k] + d * f.hi[k];
        }
    }
}

template <typename T>
T shrink(const T& v, double lambda) {
    if constexpr (std::is_same_v<T, cplx>) {
        const double m = std::abs(v);
        if (m <= lambda || m == 0.0) return T{};
        return v * ((m - lambda) / m);
    } else {
        const double m = std::fabs(v);
        if (m <= lambda) return T{};
        return v > 0 ? static_cast<T>(m - lambda) : static_cast<T>(-(m - lambda));
    }
}

} // namespace

template <typename T>
void dwt2_level(const T* img, int h, int w, WaveletFamily family, T* ll, T* lh, T* hl, T* hh) {
    const FilterPair f = filters(family);
    const int hh2 = h / 2, wh2 = w / 2;

    // horizontal pass: rows -> [lo | hi], each h x w/2
    std::vector<T> lo(static_cast<size_t>(h) * wh2), hi(static_cast<size_t>(h) * wh2);
    for (int r = 0; r < h; ++r)
        analyze_axis(img + static_cast<size_t>(r) * w, w, 1, f, lo.data() + static_cast<size_t>(r) * wh2,
                     hi.data() + static_cast<size_t>(r) * wh2, 1);

    // vertical pass: columns of lo -> (LL, HL), columns of hi -> (LH, HH)
    for (int c = 0; c < wh2; ++c) {
        analyze_axis(lo.data() + c, h, wh2, f, ll + c, hl + c, wh2);
        analyze_axis(hi.data() + c, h, wh2, f, lh + c, hh + c, wh2);
    }
    (void)hh2;
}

template <typename T>
void idwt2_level(const T* ll, const T* lh, const T* hl, const T* hh, int h, int w,
                 WaveletFamily family, T* img) {
    const FilterPair f = filters(family);
    const int wh2 = w / 2;

    std::vector<T> lo(static_cast<size_t>(h) * wh2), hi(static_cast<size_t>(h) * wh2);
    for (int c = 0; c < wh2; ++c) {
        synthesize_axis(ll + c, hl + c, h, wh2, f, lo.data() + c, wh2);
        synthesize_axis(lh + c, hh + c, h, wh2, f, hi.data() + c, wh2);
    }
    for (int r = 0; r < h; ++r)
        synthesize_axis(lo.data() + static_cast<size_t>(r) * wh2,
                        hi.data() + static_cast<size_t>(r) * wh2, w, 1, f,
                        img + static_cast<size_t>(r) * w, 1);
}

template <typename T>
WaveletCoeffs<T> dwt2(const std::vector<T>& img, int height, int width, int levels,
                      WaveletFamily family) {
    if (levels < 0) throw InvalidConfigError("dwt2: levels must be >= 0");
    const int div = 1 << levels;
    if (height % div != 0 || width % div != 0)
        throw InvalidInputError("dwt2: shape not divisible by 2^levels");
    if (img.size() != static_cast<size_t>(height) * width)
        throw InvalidInputError("dwt2: data length mismatch");

    WaveletCoeffs<T> out;
    out.levels = levels;
    out.height = height;
    out.width = width;
    out.family = family;

    std::vector<T> cur = img;
    int h = height, w = width;
    for (int lvl = 0; lvl < levels; ++lvl) {
        WaveletLevel<T> d;
        d.height = h / 2;
        d.width = w / 2;
        const size_t qn = static_cast<size_t>(d.height) * d.width;
        d.lh.resize(qn);
        d.hl.resize(qn);
        d.hh.resize(qn);
        std::vector<T> ll(qn);
        dwt2_level(cur.data(), h, w, family, ll.data(), d.lh.data(), d.hl.data(), d.hh.data());
        out.detail.push_back(std::move(d));
        cur = std::move(ll);
        h /= 2;
        w /= 2;
    }
    out.ll = std::move(cur);
    out.ll_height = h;
    out.ll_width = w;
    return out;
}

template <typename T>
std::vector<T> idwt2(const WaveletCoeffs<T>& coeffs) {
    std::vector<T> cur = coeffs.ll;
    int h = coeffs.ll_height, w = coeffs.ll_width;
    for (int lvl = coeffs.levels - 1; lvl >= 0; --lvl) {
        const WaveletLevel<T>& d = coeffs.detail[static_cast<size_t>(lvl)];
        std::vector<T> next(static_cast<size_t>(h * 2) * (w * 2));
        idwt2_level(cur.data(), d.lh.data(), d.hl.data(), d.hh.data(), h * 2, w * 2, coeffs.family,
                    next.data());
        cur = std::move(next);
        h *= 2;
        w *= 2;
    }
    return cur;
}

WaveletCoeffsC dwt2(const ComplexImage& img, int levels, WaveletFamily family) {
    return dwt2(img.data, img.height, img.width, levels, family);
}

ComplexImage idwt2_image(const WaveletCoeffsC& coeffs) {
    ComplexImage out(coeffs.height, coeffs.width);
    out.data = idwt2(coeffs);
    return out;
}

template <typename T>
WaveletCoeffs<T> soft_threshold(const WaveletCoeffs<T>& coeffs, double lambda, bool threshold_ll) {
    if (lambda < 0.0) throw InvalidConfigError("soft_threshold: lambda must be >= 0");
    WaveletCoeffs<T> out = coeffs;
    for (auto& d : out.detail) {
        for (auto& v : d.lh) v = shrink(v, lambda);
        for (auto& v : d.hl) v = shrink(v, lambda);
        for (auto& v : d.hh) v = shrink(v, lambda);
    }
    if (threshold_ll)
        for (auto& v : out.ll) v = shrink(v, lambda);
    return out;
}

template <typename T>
double coeff_l1(const WaveletCoeffs<T>& coeffs, bool include_ll) {
    double acc = 0.0;
    auto add = [&acc](const std::vector<T>& v) {
        for (const T& z : v) acc += std::abs(z);
    };
    for (const auto& d : coeffs.detail) {
        add(d.lh);
        add(d.hl);
        add(d.hh);
    }
    if (include_ll) add(coeffs.ll);
    return acc;
}

WaveletFamily wavelet_family_from_string(const std::string& name) {
    if (name == "haar") return WaveletFamily::haar;
    if (name == "db2") return WaveletFamily::db2;
    throw InvalidConfigError("unknown wavelet family: " + name);
}

std::string to_string(WaveletFamily family) {
    return family == WaveletFamily::haar ? "haar" : "db2";
}

template void dwt2_level<double>(const double*, int, int, WaveletFamily, double*, double*, double*,
                                 double*);
template void dwt2_level<cplx>(const cplx*, int, int, WaveletFamily, cplx*, cplx*, cplx*, cplx*);
template void idwt2_level<double>(const double*, const double*, const double*, const double*, int,
                                  int, WaveletFamily, double*);
template void idwt2_level<cplx>(const cplx*, const cplx*, const cplx*, const cplx*, int, int,
                                WaveletFamily, cplx*);
template WaveletCoeffs<double> dwt2<double>(const std::vector<double>&, int, int, int,
                                            WaveletFamily);
template WaveletCoeffs<cplx> dwt2<cplx>(const std::vector<cplx>&, int, int, int, WaveletFamily);
template std::vector<double> idwt2<double>(const WaveletCoeffs<double>&);
template std::vector<cplx> idwt2<cplx>(const WaveletCoeffs<cplx>&);
template WaveletCoeffs<double> soft_threshold<double>(const WaveletCoeffs<double>&, double, bool);
template WaveletCoeffs<cplx> soft_threshold<cplx>(const WaveletCoeffs<cplx>&, double, bool);
template double coeff_l1<double>(const WaveletCoeffs<double>&, bool);
template double coeff_l1<cplx>(const WaveletCoeffs<cplx>&, bool);

} // namespace mri

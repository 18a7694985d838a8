#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "mri/errors.hpp"
#include "mri/rng.hpp"
#include "mri/types.hpp"
#include "mri/wavelets.hpp"

using mri::ComplexImage;
using mri::cplx;
using mri::WaveletCoeffsC;
using mri::WaveletFamily;

namespace {

ComplexImage random_image(int h, int w, uint64_t seed) {
    mri::Rng rng(seed);
    ComplexImage img(h, w);
    for (auto& v : img.data) v = cplx(rng.normal(), rng.normal());
    return img;
}

// --- Independent single-level oracle -------------------------------------
// Analysis low-pass taps from the closed-form Daubechies expressions; the
// high-pass is the alternating flip g[k] = (-1)^k h[L-1-k]. Periodic
// convolution, stride 2: lo[j] = sum_k h[k] x[(2j+k) mod n].

std::vector<double> oracle_lo(WaveletFamily f) {
    if (f == WaveletFamily::haar) {
        const double s = 1.0 / std::sqrt(2.0);
        return {s, s};
    }
    const double r3 = std::sqrt(3.0);
    const double d = 4.0 * std::sqrt(2.0);
    return {(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d};
}

std::vector<double> oracle_hi(WaveletFamily f) {
    std::vector<double> h = oracle_lo(f);
    const int L = static_cast<int>(h.size());
    std::vector<double> g(h.size());
    for (int k = 0; k < L; ++k) g[static_cast<size_t>(k)] = (k % 2 ? -1.0 : 1.0) * h[static_cast<size_t>(L - 1 - k)];
    return g;
}

void oracle_analyze_1d(const std::vector<cplx>& x, const std::vector<double>& taps,
                       std::vector<cplx>& out) {
    const int n = static_cast<int>(x.size());
    out.assign(static_cast<size_t>(n / 2), cplx(0.0, 0.0));
    for (int j = 0; j < n / 2; ++j) {
        cplx acc(0.0, 0.0);
        for (int k = 0; k < static_cast<int>(taps.size()); ++k)
            acc += taps[static_cast<size_t>(k)] * x[static_cast<size_t>((2 * j + k) % n)];
        out[static_cast<size_t>(j)] = acc;
    }
}

struct OracleBands {
    std::vector<cplx> ll, lh, hl, hh; // (h/2)x(w/2) each, row-major
};

// Separable 2D: filter rows first (horizontal), then columns (vertical).
// First letter = vertical filter, second = horizontal (LH = low-v, high-h).
OracleBands oracle_dwt_level(const ComplexImage& img, WaveletFamily f) {
    const int h = img.height, w = img.width;
    const std::vector<double> lo = oracle_lo(f), hi = oracle_hi(f);

    std::vector<std::vector<cplx>> row_lo(static_cast<size_t>(h)), row_hi(static_cast<size_t>(h));
    for (int r = 0; r < h; ++r) {
        std::vector<cplx> row(static_cast<size_t>(w));
        for (int c = 0; c < w; ++c) row[static_cast<size_t>(c)] = img.at(r, c);
        oracle_analyze_1d(row, lo, row_lo[static_cast<size_t>(r)]);
        oracle_analyze_1d(row, hi, row_hi[static_cast<size_t>(r)]);
    }

    OracleBands out;
    const int h2 = h / 2, w2 = w / 2;
    out.ll.resize(static_cast<size_t>(h2) * w2);
    out.lh.resize(static_cast<size_t>(h2) * w2);
    out.hl.resize(static_cast<size_t>(h2) * w2);
    out.hh.resize(static_cast<size_t>(h2) * w2);
    for (int c = 0; c < w2; ++c) {
        std::vector<cplx> col_lo(static_cast<size_t>(h)), col_hi(static_cast<size_t>(h));
        for (int r = 0; r < h; ++r) {
            col_lo[static_cast<size_t>(r)] = row_lo[static_cast<size_t>(r)][static_cast<size_t>(c)];
            col_hi[static_cast<size_t>(r)] = row_hi[static_cast<size_t>(r)][static_cast<size_t>(c)];
        }
        std::vector<cplx> v;
        oracle_analyze_1d(col_lo, lo, v);
        for (int r = 0; r < h2; ++r) out.ll[static_cast<size_t>(r) * w2 + c] = v[static_cast<size_t>(r)];
        oracle_analyze_1d(col_lo, hi, v);
        for (int r = 0; r < h2; ++r) out.hl[static_cast<size_t>(r) * w2 + c] = v[static_cast<size_t>(r)];
        oracle_analyze_1d(col_hi, lo, v);
        for (int r = 0; r < h2; ++r) out.lh[static_cast<size_t>(r) * w2 + c] = v[static_cast<size_t>(r)];
        oracle_analyze_1d(col_hi, hi, v);
        for (int r = 0; r < h2; ++r) out.hh[static_cast<size_t>(r) * w2 + c] = v[static_cast<size_t>(r)];
    }
    return out;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double energy(const std::vector<cplx>& v) {
    double e = 0.0;
    for (const auto& z : v) e += std::norm(z);
    return e;
}

} // namespace

TEST_CASE("haar single level on 2x2 blocks matches the block averages") {
    // For an isolated 2x2 block (a b / c d) the orthonormal haar transform is
    //   ll = (a+b+c+d)/2, lh = (a-b+c-d)/2, hl = (a+b-c-d)/2, hh = (a-b-c+d)/2.
    ComplexImage img = random_image(4, 4, 1);
    WaveletCoeffsC co = mri::dwt2(img, 1, WaveletFamily::haar);
    REQUIRE(co.detail.size() == 1);
    REQUIRE(co.detail[0].height == 2);
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const cplx a = img.at(2 * j, 2 * i), b = img.at(2 * j, 2 * i + 1);
            const cplx c = img.at(2 * j + 1, 2 * i), d = img.at(2 * j + 1, 2 * i + 1);
            const size_t idx = static_cast<size_t>(j) * 2 + i;
            CHECK(std::abs(co.ll[idx] - (a + b + c + d) * 0.5) < 1e-12);
            CHECK(std::abs(co.detail[0].lh[idx] - (a - b + c - d) * 0.5) < 1e-12);
            CHECK(std::abs(co.detail[0].hl[idx] - (a + b - c - d) * 0.5) < 1e-12);
            CHECK(std::abs(co.detail[0].hh[idx] - (a - b - c + d) * 0.5) < 1e-12);
        }
    }
}

TEST_CASE("single-level dwt2 matches the periodic convolution oracle") {
    for (WaveletFamily f : {WaveletFamily::haar, WaveletFamily::db2}) {
        CAPTURE(mri::to_string(f));
        ComplexImage img = random_image(8, 8, 2);
        WaveletCoeffsC co = mri::dwt2(img, 1, f);
        OracleBands oracle = oracle_dwt_level(img, f);
        CHECK(max_abs_diff(co.ll, oracle.ll) < 1e-12);
        CHECK(max_abs_diff(co.detail[0].lh, oracle.lh) < 1e-12);
        CHECK(max_abs_diff(co.detail[0].hl, oracle.hl) < 1e-12);
        CHECK(max_abs_diff(co.detail[0].hh, oracle.hh) < 1e-12);
    }
}

TEST_CASE("two-level dwt2 equals the oracle applied twice to the LL band") {
    ComplexImage img = random_image(16, 16, 3);
    WaveletCoeffsC co = mri::dwt2(img, 2, WaveletFamily::db2);
    REQUIRE(co.detail.size() == 2);
    // detail[0] is the finest level.
    OracleBands level0 = oracle_dwt_level(img, WaveletFamily::db2);
    CHECK(max_abs_diff(co.detail[0].lh, level0.lh) < 1e-12);

    ComplexImage ll0(8, 8);
    ll0.data = level0.ll;
    OracleBands level1 = oracle_dwt_level(ll0, WaveletFamily::db2);
    CHECK(max_abs_diff(co.detail[1].lh, level1.lh) < 1e-12);
    CHECK(max_abs_diff(co.detail[1].hh, level1.hh) < 1e-12);
    CHECK(max_abs_diff(co.ll, level1.ll) < 1e-12);
    CHECK(co.ll_height == 4);
    CHECK(co.ll_width == 4);
}

TEST_CASE("round trip idwt2(dwt2(x)) == x at 64x64 for both families, levels 1-3") {
    ComplexImage img = random_image(64, 64, 4);
    for (WaveletFamily f : {WaveletFamily::haar, WaveletFamily::db2}) {
        for (int levels : {1, 2, 3}) {
            CAPTURE(mri::to_string(f));
            CAPTURE(levels);
            WaveletCoeffsC co = mri::dwt2(img, levels, f);
            ComplexImage back = mri::idwt2_image(co);
            CHECK(max_abs_diff(back.data, img.data) < 1e-12);
        }
    }
}

TEST_CASE("orthonormal transform preserves energy") {
    ComplexImage img = random_image(32, 32, 5);
    const double e0 = energy(img.data);
    for (WaveletFamily f : {WaveletFamily::haar, WaveletFamily::db2}) {
        WaveletCoeffsC co = mri::dwt2(img, 3, f);
        double e = energy(co.ll);
        for (const auto& d : co.detail) e += energy(d.lh) + energy(d.hl) + energy(d.hh);
        CHECK(e == doctest::Approx(e0).epsilon(1e-12));
        CHECK(co.coeff_count() == img.numel());
    }
}

TEST_CASE("real-valued transform round-trips as well") {
    mri::Rng rng(6);
    const int n = 16;
    std::vector<double> x(static_cast<size_t>(n) * n);
    for (auto& v : x) v = rng.normal();
    auto co = mri::dwt2(x, n, n, 2, WaveletFamily::db2);
    std::vector<double> back = mri::idwt2(co);
    double m = 0.0;
    for (size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(back[i] - x[i]));
    CHECK(m < 1e-12);
}

TEST_CASE("raw dwt2_level / idwt2_level round-trip on a rectangular buffer") {
    ComplexImage img = random_image(8, 12, 7);
    const int h2 = 4, w2 = 6;
    std::vector<cplx> ll(static_cast<size_t>(h2) * w2), lh(ll.size()), hl(ll.size()), hh(ll.size());
    mri::dwt2_level(img.data.data(), 8, 12, WaveletFamily::db2, ll.data(), lh.data(), hl.data(),
                    hh.data());
    std::vector<cplx> back(img.data.size());
    mri::idwt2_level(ll.data(), lh.data(), hl.data(), hh.data(), 8, 12, WaveletFamily::db2,
                     back.data());
    CHECK(max_abs_diff(back, img.data) < 1e-12);
}

TEST_CASE("soft threshold shrinks complex magnitudes and keeps phase") {
    ComplexImage img = random_image(8, 8, 8);
    const double lambda = 0.4;
    WaveletCoeffsC co = mri::dwt2(img, 2, WaveletFamily::haar);
    WaveletCoeffsC sh = mri::soft_threshold(co, lambda);

    auto check_band = [&](const std::vector<cplx>& before, const std::vector<cplx>& after) {
        for (size_t i = 0; i < before.size(); ++i) {
            const double m = std::abs(before[i]);
            cplx expect = m > lambda ? before[i] * ((m - lambda) / m) : cplx(0.0, 0.0);
            CHECK(std::abs(after[i] - expect) < 1e-12);
        }
    };
    for (size_t lvl = 0; lvl < co.detail.size(); ++lvl) {
        check_band(co.detail[lvl].lh, sh.detail[lvl].lh);
        check_band(co.detail[lvl].hl, sh.detail[lvl].hl);
        check_band(co.detail[lvl].hh, sh.detail[lvl].hh);
    }
    // LL passes through untouched by default.
    for (size_t i = 0; i < co.ll.size(); ++i) CHECK(sh.ll[i] == co.ll[i]);

    // threshold_ll = true shrinks the approximation band too.
    WaveletCoeffsC sh_ll = mri::soft_threshold(co, lambda, true);
    check_band(co.ll, sh_ll.ll);

    CHECK_THROWS_AS(mri::soft_threshold(co, -0.1), mri::InvalidConfigError);
}

TEST_CASE("a large threshold annihilates every detail coefficient") {
    ComplexImage img = random_image(16, 16, 9);
    WaveletCoeffsC co = mri::dwt2(img, 2, WaveletFamily::db2);
    WaveletCoeffsC sh = mri::soft_threshold(co, 1e9);
    for (const auto& d : sh.detail) {
        for (const auto& v : d.lh) CHECK(v == cplx(0.0, 0.0));
        for (const auto& v : d.hl) CHECK(v == cplx(0.0, 0.0));
        for (const auto& v : d.hh) CHECK(v == cplx(0.0, 0.0));
    }
    CHECK(mri::coeff_l1(sh) == 0.0);
}

TEST_CASE("coeff_l1 sums detail moduli, optionally including LL") {
    ComplexImage img = random_image(8, 8, 10);
    WaveletCoeffsC co = mri::dwt2(img, 1, WaveletFamily::haar);
    double detail_sum = 0.0, ll_sum = 0.0;
    for (const auto& v : co.detail[0].lh) detail_sum += std::abs(v);
    for (const auto& v : co.detail[0].hl) detail_sum += std::abs(v);
    for (const auto& v : co.detail[0].hh) detail_sum += std::abs(v);
    for (const auto& v : co.ll) ll_sum += std::abs(v);
    CHECK(mri::coeff_l1(co) == doctest::Approx(detail_sum).epsilon(1e-12));
    CHECK(mri::coeff_l1(co, true) == doctest::Approx(detail_sum + ll_sum).epsilon(1e-12));
}

TEST_CASE("dwt2 validates shapes") {
    ComplexImage odd = random_image(6, 6, 11);
    CHECK_THROWS_AS(mri::dwt2(odd, 2, WaveletFamily::haar), mri::InvalidInputError); // 6 % 4 != 0
    ComplexImage ok = random_image(8, 8, 12);
    CHECK_NOTHROW(mri::dwt2(ok, 3, WaveletFamily::haar));
    CHECK_THROWS_AS(mri::dwt2(ok, 4, WaveletFamily::haar), mri::InvalidInputError);
    CHECK_THROWS_AS(mri::dwt2(ok, -1, WaveletFamily::haar), mri::InvalidConfigError);
    std::vector<cplx> short_buf(10);
    CHECK_THROWS_AS(mri::dwt2(short_buf, 8, 8, 1, WaveletFamily::haar), mri::InvalidInputError);
}

TEST_CASE("levels=0 is the identity") {
    ComplexImage img = random_image(8, 8, 13);
    WaveletCoeffsC co = mri::dwt2(img, 0, WaveletFamily::db2);
    CHECK(co.detail.empty());
    CHECK(co.ll_height == 8);
    CHECK(max_abs_diff(co.ll, img.data) == 0.0);
    ComplexImage back = mri::idwt2_image(co);
    CHECK(max_abs_diff(back.data, img.data) == 0.0);
}

TEST_CASE("family name parsing round-trips and rejects unknowns") {
    CHECK(mri::wavelet_family_from_string("haar") == WaveletFamily::haar);
    CHECK(mri::wavelet_family_from_string("db2") == WaveletFamily::db2);
    CHECK(mri::to_string(WaveletFamily::haar) == "haar");
    CHECK(mri::to_string(WaveletFamily::db2) == "db2");
    CHECK_THROWS_AS(mri::wavelet_family_from_string("sym4"), mri::InvalidConfigError);
}

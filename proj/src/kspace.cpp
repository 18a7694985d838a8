#include "mri/kspace.hpp"

#include <algorithm>
#include <cmath>

#include "mri/fft.hpp"
#include "mri/rng.hpp"

namespace mri {

SamplingMask make_mask(int height, int width, int acceleration, int acs_count, int offset) {
    if (acceleration < 1) throw InvalidConfigError("make_mask: acceleration must be >= 1");
    if (acs_count < 0) throw InvalidConfigError("make_mask: acs_count must be >= 0");
    if (acs_count > height) throw InvalidConfigError("make_mask: acs_count exceeds height");
    if (offset < 0 || offset >= acceleration)
        throw InvalidConfigError("make_mask: offset must be in [0, acceleration)");
    if (height < 1 || width < 1) throw InvalidConfigError("make_mask: empty grid");

    SamplingMask m;
    m.height = height;
    m.width = width;
    m.acs_count = acs_count;
    m.acceleration = acceleration;
    m.line_selected.assign(static_cast<size_t>(height), 0);
    for (int r = offset; r < height; r += acceleration) m.line_selected[r] = 1;
    const int first = height / 2 - acs_count / 2;
    for (int r = first; r < first + acs_count; ++r) m.line_selected[r] = 1;
    return m;
}

int default_acs_count(int height, int acceleration) {
    double frac = (acceleration >= 8) ? 0.04 : 0.08;
    int acs = static_cast<int>(std::lround(frac * height));
    return std::max(acs, 2);
}

void apply_mask(const SamplingMask& mask, ComplexImage& k) {
    if (k.height != mask.height || k.width != mask.width)
        throw InvalidInputError("apply_mask: shape mismatch");
    for (int r = 0; r < k.height; ++r) {
        if (mask.selected(r)) continue;
        cplx* row = k.data.data() + static_cast<size_t>(r) * k.width;
        std::fill(row, row + k.width, cplx(0.0, 0.0));
    }
}

void apply_mask(const SamplingMask& mask, CoilKSpace& k) {
    if (k.height != mask.height || k.width != mask.width)
        throw InvalidInputError("apply_mask: shape mismatch");
    for (int l = 0; l < k.coils; ++l) {
        cplx* coil = k.coil(l);
        for (int r = 0; r < k.height; ++r) {
            if (mask.selected(r)) continue;
            std::fill(coil + static_cast<size_t>(r) * k.width,
                      coil + static_cast<size_t>(r + 1) * k.width, cplx(0.0, 0.0));
        }
    }
}

CoilKSpace apply_forward(const ForwardOperator& op, const ComplexImage& x) {
    op.check_consistent();
    if (x.height != op.mask.height || x.width != op.mask.width)
        throw InvalidInputError("apply_forward: image shape mismatch");

    const int L = op.maps.coils, H = x.height, W = x.width;
    CoilKSpace y(L, H, W);
    ComplexImage tmp(H, W);
    for (int l = 0; l < L; ++l) {
        const cplx* s = op.maps.coil(l);
        for (size_t i = 0; i < x.numel(); ++i) tmp.data[i] = s[i] * x.data[i];
        fft2c_raw(tmp.data.data(), H, W, -1);
        cplx* out = y.coil(l);
        for (int r = 0; r < H; ++r) {
            cplx* row = out + static_cast<size_t>(r) * W;
            if (op.mask.selected(r))
                std::copy(tmp.data.begin() + static_cast<size_t>(r) * W,
                          tmp.data.begin() + static_cast<size_t>(r + 1) * W, row);
            else
                std::fill(row, row + W, cplx(0.0, 0.0));
        }
    }
    return y;
}

ComplexImage apply_adjoint(const ForwardOperator& op, const CoilKSpace& y) {
    op.check_consistent();
    if (y.height != op.mask.height || y.width != op.mask.width || y.coils != op.maps.coils)
        throw InvalidInputError("apply_adjoint: k-space shape mismatch");

    const int L = y.coils, H = y.height, W = y.width;
    ComplexImage acc(H, W);
    ComplexImage tmp(H, W);
    for (int l = 0; l < L; ++l) {
        const cplx* src = y.coil(l);
        for (int r = 0; r < H; ++r) {
            cplx* row = tmp.data.data() + static_cast<size_t>(r) * W;
            if (op.mask.selected(r))
                std::copy(src + static_cast<size_t>(r) * W, src + static_cast<size_t>(r + 1) * W,
                          row);
            else
                std::fill(row, row + W, cplx(0.0, 0.0));
        }
        fft2c_raw(tmp.data.data(), H, W, +1);
        const cplx* s = op.maps.coil(l);
        for (size_t i = 0; i < acc.numel(); ++i) {
            // conj(s) * tmp, spelled out so the network graph path can
            // reproduce it bit-for-bit
            const double ar = s[i].real(), ai = -s[i].imag();
            const double br = tmp.data[i].real(), bi = tmp.data[i].imag();
            acc.data[i] += cplx(ar * br - ai * bi, ar * bi + ai * br);
        }
    }
    return acc;
}

namespace {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Modified (Toft) Shepp-Logan intensities; values stay in [0, 1].
constexpr Ellipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

ComplexImage render_phantom(int n, const Ellipse* ellipses, int count, bool smooth_phase) {
    ComplexImage img(n, n);
    const double half = n / 2.0;
    for (int r = 0; r < n; ++r) {
        const double y = (half - 0.5 - r) / half;
        for (int c = 0; c < n; ++c) {
            const double x = (c + 0.5 - half) / half;
            double v = 0.0;
            for (int e = 0; e < count; ++e) {
                const Ellipse& el = ellipses[e];
                const double phi = el.phi_deg * 3.14159265358979323846 / 180.0;
                const double dx = x - el.x0, dy = y - el.y0;
                const double xr = dx * std::cos(phi) + dy * std::sin(phi);
                const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
                if ((xr * xr) / (el.a * el.a) + (yr * yr) / (el.b * el.b) <= 1.0) v += el.value;
            }
            v = std::clamp(v, 0.0, 1.0);
            if (smooth_phase && v > 0.0) {
                const double ph = 0.5 * x + 0.3 * y + 0.4 * x * y;
                img.at(r, c) = cplx(v * std::cos(ph), v * std::sin(ph));
            } else {
                img.at(r, c) = cplx(v, 0.0);
            }
        }
    }
    return img;
}

} // namespace

ComplexImage make_phantom(int n, bool smooth_phase) {
    if (n < 8) throw InvalidConfigError("make_phantom: n must be >= 8");
    return render_phantom(n, kSheppLogan, static_cast<int>(std::size(kSheppLogan)), smooth_phase);
}

ComplexImage make_phantom_variant(int n, uint64_t variant, bool smooth_phase) {
    if (n < 8) throw InvalidConfigError("make_phantom_variant: n must be >= 8");
    if (variant == 0 && !smooth_phase) return make_phantom(n, false);

    Rng rng(0x9e3779b9u ^ variant);
    Ellipse jittered[std::size(kSheppLogan)];
    for (size_t e = 0; e < std::size(kSheppLogan); ++e) {
        Ellipse el = kSheppLogan[e];
        if (variant != 0) {
            el.a *= 1.0 + 0.10 * rng.uniform(-1.0, 1.0);
            el.b *= 1.0 + 0.10 * rng.uniform(-1.0, 1.0);
            el.x0 += 0.04 * rng.uniform(-1.0, 1.0);
            el.y0 += 0.04 * rng.uniform(-1.0, 1.0);
            el.phi_deg += 6.0 * rng.uniform(-1.0, 1.0);
            if (e > 0) el.value *= 1.0 + 0.10 * rng.uniform(-1.0, 1.0);
        }
        jittered[e] = el;
    }
    return render_phantom(n, jittered, static_cast<int>(std::size(kSheppLogan)), smooth_phase);
}

SensitivitySet make_coil_maps(int n, int coils) {
    if (coils < 1) throw InvalidConfigError("make_coil_maps: coils must be >= 1");
    if (n < 1) throw InvalidConfigError("make_coil_maps: n must be >= 1");

    SensitivitySet maps(coils, n, n);
    const double pi = 3.14159265358979323846;
    const double center = (n - 1) / 2.0;
    const double radius = 0.60 * n;
    const double sigma = 0.55 * n;

    for (int l = 0; l < coils; ++l) {
        const double theta = 2.0 * pi * l / coils + pi / (2.0 * coils);
        const double cx = center + radius * std::cos(theta);
        const double cy = center + radius * std::sin(theta);
        cplx* s = maps.coil(l);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
                // smooth linear phase along the coil direction
                const double ph =
                    0.4 * pi * ((c - center) * std::cos(theta) + (r - center) * std::sin(theta)) / n +
                    0.5 * pi * l / coils;
                s[static_cast<size_t>(r) * n + c] = cplx(mag * std::cos(ph), mag * std::sin(ph));
            }
        }
    }

    // normalize: Gaussians are positive everywhere, so RSS > 0 everywhere
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            double ss = 0.0;
            for (int l = 0; l < coils; ++l) ss += std::norm(maps.at(l, r, c));
            const double inv = 1.0 / std::sqrt(ss);
            for (int l = 0; l < coils; ++l) maps.at(l, r, c) *= inv;
        }
    }
    return maps;
}

RealImage rss(const CoilKSpace& coil_images) {
    if (coil_images.coils < 1) throw InvalidInputError("rss: need at least one coil");
    RealImage out(coil_images.height, coil_images.width);
    for (int l = 0; l < coil_images.coils; ++l) {
        const cplx* src = coil_images.coil(l);
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] += std::norm(src[i]);
    }
    for (double& v : out.data) v = std::sqrt(v);
    return out;
}

cplx cdot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.size() != b.size()) throw InvalidInputError("cdot: length mismatch");
    cplx acc(0.0, 0.0);
    for (size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

double cnorm(const std::vector<cplx>& a) {
    double acc = 0.0;
    for (const cplx& v : a) acc += std::norm(v);
    return std::sqrt(acc);
}

} // namespace mri

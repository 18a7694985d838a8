#include "mri/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace mri {
namespace {

// FFTW plan creation is not thread-safe; execution of a cached plan is.
// Plans are created with FFTW_ESTIMATE (deterministic algorithm choice)
// and FFTW_UNALIGNED so they can run on any buffer via fftw_execute_dft.
std::mutex g_plan_mutex;

fftw_plan get_plan(int h, int w, int sign) {
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_tuple(h, w, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<cplx> dummy(static_cast<size_t>(h) * w);
    fftw_plan p = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(dummy.data()),
                                   reinterpret_cast<fftw_complex*>(dummy.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, p);
    return p;
}

// Circular roll by `shift` along both axes: out[(i+sh) % n] = in[i].
void roll2d(const cplx* in, cplx* out, int h, int w, int sh, int sw) {
    for (int r = 0; r < h; ++r) {
        int rr = r + sh;
        if (rr >= h) rr -= h;
        const cplx* src = in + static_cast<size_t>(r) * w;
        cplx* dst = out + static_cast<size_t>(rr) * w;
        for (int c = 0; c < w; ++c) {
            int cc = c + sw;
            if (cc >= w) cc -= w;
            dst[cc] = src[c];
        }
    }
}

} // namespace

void fft2c_raw(cplx* data, int height, int width, int sign) {
    const size_t n = static_cast<size_t>(height) * width;
    std::vector<cplx> tmp(n);

    // ifftshift: roll by ceil(n/2) == n - n/2
    roll2d(data, tmp.data(), height, width, height - height / 2, width - width / 2);

    fftw_plan plan = get_plan(height, width, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(tmp.data()));

    // fftshift: roll by floor(n/2)
    roll2d(tmp.data(), data, height, width, height / 2, width / 2);

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) data[i] *= scale;
}

ComplexImage fft2c(const ComplexImage& img) {
    for (const cplx& v : img.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw InvalidInputError("fft2c: non-finite input");
    ComplexImage out = img;
    fft2c_raw(out.data.data(), out.height, out.width, -1);
    return out;
}

ComplexImage ifft2c(const ComplexImage& ksp) {
    for (const cplx& v : ksp.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw InvalidInputError("ifft2c: non-finite input");
    ComplexImage out = ksp;
    fft2c_raw(out.data.data(), out.height, out.width, +1);
    return out;
}

} // namespace mri

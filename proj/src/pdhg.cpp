#include "mri/pdhg.hpp"

#include <cmath>
#include <fstream>

#include "mri/fft.hpp"
#include "mri/kspace.hpp"
#include "mri/rng.hpp"

namespace mri {

double estimate_opnorm(const ForwardOperator& op, int iters) {
    if (iters < 5) throw InvalidConfigError("estimate_opnorm: iters must be >= 5");
    op.check_consistent();

    const int H = op.mask.height, W = op.mask.width;
    ComplexImage v(H, W);
    Rng rng(20240423);
    for (cplx& z : v.data) z = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    double nv = cnorm(v.data);
    if (nv == 0.0) return 0.0;
    for (cplx& z : v.data) z /= nv;

    double est = 0.0;
    for (int it = 0; it < iters; ++it) {
        ComplexImage av = apply_adjoint(op, apply_forward(op, v)); // A v, A = E^H E
        const double na = cnorm(av.data);
        if (na == 0.0) return 0.0;
        est = na; // ||A v_k|| with ||v_k|| = 1, converges to lambda_max(A) from below
        for (cplx& z : av.data) z /= na;
        v = std::move(av);
    }
    return std::sqrt(est);
}

double objective(const ComplexImage& x, const CoilKSpace& y, const ForwardOperator& op,
                 double lambda, WaveletFamily family, int levels) {
    CoilKSpace ex = apply_forward(op, x);
    double data = 0.0;
    for (size_t i = 0; i < ex.numel(); ++i) data += std::norm(ex.data[i] - y.data[i]);
    data *= 0.5;
    // The L1 penalty runs over detail subbands only, matching the prox
    // (soft_threshold leaves LL untouched by default).
    double l1 = 0.0;
    if (lambda > 0.0) l1 = lambda * coeff_l1(dwt2(x, levels, family), /*include_ll=*/false);
    return data + l1;
}

RealImage zero_filled(const CoilKSpace& y, const ForwardOperator& op) {
    op.check_consistent();
    if (y.height != op.mask.height || y.width != op.mask.width)
        throw InvalidInputError("zero_filled: shape mismatch");
    CoilKSpace masked = y;
    apply_mask(op.mask, masked);
    for (int l = 0; l < masked.coils; ++l) fft2c_raw(masked.coil(l), masked.height, masked.width, +1);
    return rss(masked);
}

namespace {

void axpy(std::vector<cplx>& y, double a, const std::vector<cplx>& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void scale(std::vector<cplx>& y, double a) {
    for (cplx& v : y) v *= a;
}

} // namespace

PdhgResult solve_cs(const CoilKSpace& y, const ForwardOperator& op, const PdhgConfig& cfg,
                    const ComplexImage* x0) {
    op.check_consistent();
    if (y.height != op.mask.height || y.width != op.mask.width || y.coils != op.maps.coils)
        throw InvalidInputError("solve_cs: k-space shape mismatch");
    if (cfg.lambda < 0.0) throw InvalidConfigError("solve_cs: lambda must be >= 0");
    if (cfg.n_iter < 1) throw InvalidConfigError("solve_cs: n_iter must be >= 1");
    if (cfg.theta < 0.0 || cfg.theta > 1.0)
        throw InvalidConfigError("solve_cs: theta must be in [0, 1]");

    // ||K||^2 for the stacked operator (E; psi): psi is orthonormal, so
    // ||K||^2 = ||E||^2 + 1.
    const double opnorm_e = estimate_opnorm(op, 30);
    const double knorm2 = opnorm_e * opnorm_e + 1.0;

    double tau = cfg.tau, sigma = cfg.sigma;
    if (tau <= 0.0 || sigma <= 0.0) tau = sigma = 0.9 / std::sqrt(knorm2);
    if (tau * sigma * knorm2 > 1.0 + 1e-9)
        throw InvalidConfigError("solve_cs: step sizes violate tau*sigma*||K||^2 <= 1");

    const int H = y.height, W = y.width;
    ComplexImage x = x0 ? *x0 : apply_adjoint(op, y);
    if (x.height != H || x.width != W) throw InvalidInputError("solve_cs: x0 shape mismatch");
    ComplexImage xbar = x;

    CoilKSpace z1(y.coils, H, W); // dual of the data term
    // Scaled dual of the L1 term: w = z2 / sigma. The update
    //   z2 <- v - sigma soft(v/sigma, lambda/sigma), v = z2 + sigma psi xbar
    // becomes  w <- u - soft(u, lambda/sigma),  u = w + psi xbar.
    // soft_threshold leaves LL alone, so the LL dual stays exactly zero
    // (the LL band is not penalized).
    WaveletCoeffsC w = dwt2(ComplexImage(H, W), cfg.levels, cfg.family);

    PdhgResult res;
    res.trace.reserve(static_cast<size_t>(cfg.n_iter));

    auto coeff_axpy = [](WaveletCoeffsC& a, double s, const WaveletCoeffsC& b) {
        for (size_t l = 0; l < a.detail.size(); ++l) {
            axpy(a.detail[l].lh, s, b.detail[l].lh);
            axpy(a.detail[l].hl, s, b.detail[l].hl);
            axpy(a.detail[l].hh, s, b.detail[l].hh);
        }
        axpy(a.ll, s, b.ll);
    };

    for (int it = 0; it < cfg.n_iter; ++it) {
        // dual ascent on the data term: prox of sigma * F1^*,
        // F1(z) = 1/2 ||z - y||^2  =>  z1 <- (z1 + sigma (E xbar - y)) / (1 + sigma)
        CoilKSpace ex = apply_forward(op, xbar);
        for (size_t i = 0; i < z1.data.size(); ++i)
            z1.data[i] = (z1.data[i] + sigma * (ex.data[i] - y.data[i])) / (1.0 + sigma);

        // dual ascent on the L1 term via Moreau on the scaled dual
        WaveletCoeffsC u = dwt2(xbar, cfg.levels, cfg.family);
        coeff_axpy(u, 1.0, w);
        WaveletCoeffsC shrunk = soft_threshold(u, cfg.lambda / sigma);
        w = std::move(u);
        coeff_axpy(w, -1.0, shrunk);

        // primal descent: x <- x - tau (E^H z1 + sigma psi^T w)
        ComplexImage grad = apply_adjoint(op, z1);
        std::vector<cplx> wt = idwt2(w);
        scale(wt, sigma);
        ComplexImage xprev = x;
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] -= tau * (grad.data[i] + wt[i]);

        // extrapolation
        for (size_t i = 0; i < x.data.size(); ++i)
            xbar.data[i] = x.data[i] + cfg.theta * (x.data[i] - xprev.data[i]);

        CoilKSpace exn = apply_forward(op, x);
        double data = 0.0;
        for (size_t i = 0; i < exn.numel(); ++i) data += std::norm(exn.data[i] - y.data[i]);
        data *= 0.5;
        const double l1 =
            cfg.lambda > 0.0
                ? cfg.lambda * coeff_l1(dwt2(x, cfg.levels, cfg.family), /*include_ll=*/false)
                : 0.0;
        res.trace.push_back({it, data + l1, data, l1});
    }

    res.x = std::move(x);
    return res;
}

void write_trace_csv(const std::string& path, const std::vector<PdhgTracePoint>& trace) {
    std::ofstream out(path);
    if (!out) throw DataFormatError(DataFormatError::Kind::bad_field, "cannot open " + path);
    out << "iteration,objective,data_fidelity,l1_term\n";
    out.precision(17);
    for (const auto& p : trace)
        out << p.iteration << ',' << p.objective << ',' << p.data_term << ',' << p.l1_term << '\n';
}

} // namespace mri

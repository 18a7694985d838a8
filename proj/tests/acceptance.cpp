// Acceptance checks for the reconstruction toolkit. Each numbered check
// prints exactly one PASS/FAIL line with its achieved numbers; the binary
// exits with the number of failed checks. Desk-scale reference values are
// pinned as regression constants next to each check, with small slack for
// cross-platform floating-point drift. Oracle formulas in this file are
// written independently of the library implementations they verify.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mri/data_io.hpp"
#include "mri/errors.hpp"
#include "mri/fft.hpp"
#include "mri/gradcheck_suites.hpp"
#include "mri/kspace.hpp"
#include "mri/metrics.hpp"
#include "mri/networks.hpp"
#include "mri/optim.hpp"
#include "mri/pdhg.hpp"
#include "mri/rng.hpp"
#include "mri/sense.hpp"
#include "mri/train.hpp"
#include "mri/wavelets.hpp"

using namespace mri;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return std::string(buf);
}

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// PSNR against a complex ground truth with both images normalized by the
// truth's magnitude maximum (the evaluation convention used throughout).
double eval_psnr(const RealImage& recon, const ComplexImage& truth) {
    RealImage t = magnitude(truth);
    double tmax = 0.0;
    for (double v : t.data) tmax = std::max(tmax, v);
    RealImage r = recon;
    for (double& v : r.data) v /= tmax;
    for (double& v : t.data) v /= tmax;
    return psnr_capped(r, t, 1.0);
}

double eval_psnr(const ComplexImage& recon, const ComplexImage& truth) {
    return eval_psnr(magnitude(recon), truth);
}

// ------------------------------------------------------------------ 01

void check_adjoint_identity() {
    Timer timer;
    Rng rng(20260817);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 16 + 8 * (trial % 3);
        const int w = 16 + 8 * ((trial / 3) % 3);
        const int coils = 1 + trial % 4;
        const int accel = 1 + trial % 4;
        const int acs = 2 + trial % 5;
        ForwardOperator op;
        op.mask = make_mask(h, w, accel, acs, trial % accel);
        op.maps = SensitivitySet(coils, h, w);
        for (cplx& s : op.maps.data) s = cplx(rng.normal(), rng.normal());

        ComplexImage x(h, w);
        for (cplx& v : x.data) v = cplx(rng.normal(), rng.normal());
        CoilKSpace y(coils, h, w);
        for (cplx& v : y.data) v = cplx(rng.normal(), rng.normal());

        CoilKSpace ex = apply_forward(op, x);
        ComplexImage aty = apply_adjoint(op, y);

        cplx lhs(0.0, 0.0), rhs(0.0, 0.0);
        double nex = 0.0, ny = 0.0;
        for (size_t i = 0; i < ex.data.size(); ++i) {
            lhs += std::conj(ex.data[i]) * y.data[i];
            nex += std::norm(ex.data[i]);
            ny += std::norm(y.data[i]);
        }
        for (size_t i = 0; i < x.data.size(); ++i) rhs += std::conj(x.data[i]) * aty.data[i];
        const double rel = std::abs(lhs - rhs) / (std::sqrt(nex) * std::sqrt(ny) + 1e-30);
        worst = std::max(worst, rel);
    }
    const double sec = timer.seconds();
    const bool ok = worst < 1e-10 && sec < 5.0;
    report("01 adjoint-identity", ok,
           fmt("max rel err %.2e over 100 trials (< 1e-10), %.2f s (< 5 s)", worst, sec));
}

// ------------------------------------------------------------------ 02

void check_unitarity_round_trip() {
    Rng rng(7);
    ComplexImage x(64, 64);
    for (cplx& v : x.data) v = cplx(rng.normal(), rng.normal());

    double nx = 0.0;
    for (const cplx& v : x.data) nx += std::norm(v);
    nx = std::sqrt(nx);

    ComplexImage xf = fft2c(x);
    double nxf = 0.0;
    for (const cplx& v : xf.data) nxf += std::norm(v);
    nxf = std::sqrt(nxf);
    const double norm_err = std::abs(nxf - nx) / nx;

    ComplexImage back = ifft2c(xf);
    double fft_rt = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i)
        fft_rt = std::max(fft_rt, std::abs(back.data[i] - x.data[i]));

    double wav_rt = 0.0;
    for (WaveletFamily fam : {WaveletFamily::haar, WaveletFamily::db2}) {
        ComplexImage rec = idwt2_image(dwt2(x, 3, fam));
        for (size_t i = 0; i < x.data.size(); ++i)
            wav_rt = std::max(wav_rt, std::abs(rec.data[i] - x.data[i]));
    }

    const bool ok = norm_err < 1e-12 && fft_rt < 1e-12 && wav_rt < 1e-12;
    report("02 unitarity-round-trip", ok,
           fmt("fft norm err %.2e, fft round trip %.2e, wavelet round trip %.2e (all < 1e-12)",
               norm_err, fft_rt, wav_rt));
}

// ------------------------------------------------------------------ 03

void check_gradients() {
    Timer timer;
    std::vector<SuiteResult> prim = run_gradcheck_suite("primitives");
    std::vector<SuiteResult> all = run_gradcheck_suite("all");
    bool ok = !prim.empty() && !all.empty();
    double worst = 0.0;
    for (const SuiteResult& r : prim) ok = ok && r.pass && r.tolerance <= 1e-4;
    for (const SuiteResult& r : all) {
        ok = ok && r.pass && r.tolerance <= 1e-3;
        worst = std::max(worst, r.report.max_rel_err);
    }
    const double sec = timer.seconds();
    ok = ok && sec < 300.0;
    report("03 gradient-checks", ok,
           fmt("%d checks pass, max rel err %.2e, %.0f s (< 300 s)",
               static_cast<int>(all.size()), worst, sec));
}

// ------------------------------------------------------------- 04 / 05

struct BenchPoint {
    double zf = 0.0, pdhg = 0.0, xp = 0.0;
};

// Shared 64x64 phantom benchmark: 4 coils, noiseless, maps estimated from
// the calibration region, solver at lambda 1e-3 for 200 iterations, and the
// untrained (identity-at-init) unrolled network.
BenchPoint run_bench(int accel, int acs) {
    ComplexImage truth = make_phantom(64);
    ForwardOperator op;
    op.mask = make_mask(64, 64, accel, acs, 0);
    op.maps = make_coil_maps(64, 4);
    CoilKSpace y = apply_forward(op, truth);

    BenchPoint b;
    b.zf = eval_psnr(zero_filled(y, op), truth);

    SensitivitySet est = estimate_maps_lowfreq(y, op.mask, true);
    ForwardOperator op_est;
    op_est.mask = op.mask;
    op_est.maps = est;
    PdhgConfig pc;
    pc.lambda = 1e-3;
    pc.n_iter = 200;
    b.pdhg = eval_psnr(solve_cs(y, op_est, pc).x, truth);

    XpdnetConfig xc;
    ParamStore ps;
    init_xpdnet_params(ps, xc, 0);
    b.xp = eval_psnr(xpdnet_forward(y, op.mask, est, xc, ps), truth);
    return b;
}

void check_pdhg_beats_zero_filled(const BenchPoint& b4, double bench_seconds) {
    // pinned at first run on the 64x64 / accel 4 / ACS 16 benchmark
    const double pin_zf = 19.6208, pin_pdhg = 26.0526;
    const double margin = b4.pdhg - b4.zf;
    const bool ok = margin >= 3.0 && std::abs(b4.zf - pin_zf) <= 0.35 &&
                    std::abs(b4.pdhg - pin_pdhg) <= 0.35 && bench_seconds < 60.0;
    report("04 pdhg-beats-zero-filled", ok,
           fmt("zf %.4f dB (pin %.4f), pdhg %.4f dB (pin %.4f), margin %.2f dB (>= 3), %.0f s (< 60 s)",
               b4.zf, pin_zf, b4.pdhg, pin_pdhg, margin, bench_seconds));
}

void check_acceleration_monotonicity(const BenchPoint& b4, const BenchPoint& b8) {
    // pinned at first run on the 64x64 / accel 8 / ACS 8 benchmark
    const double pin_zf8 = 17.0002, pin_pdhg8 = 18.3767, pin_xp8 = 17.0413;
    const bool mono = b8.zf <= b4.zf && b8.pdhg <= b4.pdhg && b8.xp <= b4.xp;
    const bool pins = std::abs(b8.zf - pin_zf8) <= 0.35 &&
                      std::abs(b8.pdhg - pin_pdhg8) <= 0.35 &&
                      std::abs(b8.xp - pin_xp8) <= 0.35;
    report("05 acceleration-monotonicity", mono && pins,
           fmt("accel 8 vs 4: zf %.4f<=%.4f, pdhg %.4f<=%.4f, xpdnet %.4f<=%.4f dB",
               b8.zf, b4.zf, b8.pdhg, b4.pdhg, b8.xp, b4.xp));
}

// ------------------------------------------------------------------ 06

void check_identity_at_init() {
    ComplexImage truth = make_phantom(32);
    ForwardOperator op;
    op.mask = make_mask(32, 32, 4, 6, 0);
    op.maps = make_coil_maps(32, 2);
    CoilKSpace y = apply_forward(op, truth);

    SensitivitySet est = estimate_maps_lowfreq(y, op.mask, true);
    XpdnetConfig xc;
    ParamStore ps;
    init_xpdnet_params(ps, xc, 7);
    ComplexImage out = xpdnet_forward(y, op.mask, est, xc, ps);

    ForwardOperator op_est;
    op_est.mask = op.mask;
    op_est.maps = est;
    ComplexImage adj = apply_adjoint(op_est, y);

    bool exact = out.height == adj.height && out.width == adj.width;
    for (size_t i = 0; exact && i < out.data.size(); ++i) {
        exact = out.data[i].real() == adj.data[i].real() &&
                out.data[i].imag() == adj.data[i].imag();
    }
    report("06 identity-at-init", exact,
           exact ? "zero-initialized network output equals the adjoint exactly (bitwise)"
                 : "output differs from the adjoint reconstruction");
}

// ------------------------------------------------------------------ 07

void check_desk_scale_learning() {
    Timer timer;
    TrainConfig cfg;
    cfg.epochs = 7;
    cfg.max_steps = 200;
    cfg.seed = 20260817;
    cfg.accel = 4;
    cfg.acs = 6;
    cfg.data.n_slices = 32;
    cfg.data.image_size = 32;
    cfg.data.coils = 2;
    cfg.model.n_unrolled = 6;

    ParamStore ps;
    TrainReport rep = train(cfg, ps);
    const double ratio = rep.final_smoothed / rep.initial_smoothed;

    // held-out evaluation: 8 unseen phantom variants, one sampling offset
    // per variant, maps estimated from the 6 calibration lines
    double zf_sum = 0.0, xp_sum = 0.0;
    for (int v = 32; v < 40; ++v) {
        ComplexImage truth = make_phantom_variant(32, static_cast<uint64_t>(v), false);
        ForwardOperator op;
        op.mask = make_mask(32, 32, 4, 6, v % 4);
        op.maps = make_coil_maps(32, 2);
        CoilKSpace y = apply_forward(op, truth);
        zf_sum += eval_psnr(zero_filled(y, op), truth);
        SensitivitySet est = estimate_maps_lowfreq(y, op.mask, true);
        xp_sum += eval_psnr(xpdnet_forward(y, op.mask, est, cfg.model, ps), truth);
    }
    const double zf_mean = zf_sum / 8.0, xp_mean = xp_sum / 8.0;
    const double margin = xp_mean - zf_mean;
    const double sec = timer.seconds();

    // pinned at first run: smoothed-loss ratio 0.4623, held-out margin +0.9456 dB
    const double pin_ratio = 0.4623, pin_margin = 0.9456;
    const bool ok = ratio <= 0.5 && std::abs(ratio - pin_ratio) <= 0.05 && margin > 0.5 &&
                    std::abs(margin - pin_margin) <= 0.35 && rep.steps == 200 && sec < 900.0;
    report("07 desk-scale-learning", ok,
           fmt("loss ratio %.4f (<= 0.5, pin %.4f), held-out psnr zf %.4f -> xpdnet %.4f dB, "
               "margin %+.4f dB (pin %+.4f), %.0f s (< 900 s)",
               ratio, pin_ratio, zf_mean, xp_mean, margin, pin_margin, sec));
}

// ------------------------------------------------------------------ 08
// Independent metric oracles: direct per-window loops with mean-subtracted
// moments, literal multi-scale weights, truncating 2x2 mean downsampling.

std::vector<double> oracle_window() {
    std::vector<double> w(11 * 11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double di = i - 5.0, dj = j - 5.0;
            w[static_cast<size_t>(i) * 11 + j] =
                std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            sum += w[static_cast<size_t>(i) * 11 + j];
        }
    for (double& v : w) v /= sum;
    return w;
}

struct OracleSsim {
    double mean_ssim = 0.0;
    double mean_cs = 0.0;
};

OracleSsim oracle_ssim_terms(const RealImage& x, const RealImage& y, double range) {
    const std::vector<double> w = oracle_window();
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    double acc_ssim = 0.0, acc_cs = 0.0;
    int count = 0;
    for (int r = 0; r + 11 <= x.height; ++r) {
        for (int c = 0; c + 11 <= x.width; ++c) {
            double mx = 0.0, my = 0.0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    mx += w[static_cast<size_t>(i) * 11 + j] * x.at(r + i, c + j);
                    my += w[static_cast<size_t>(i) * 11 + j] * y.at(r + i, c + j);
                }
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double dx = x.at(r + i, c + j) - mx;
                    const double dy = y.at(r + i, c + j) - my;
                    const double wt = w[static_cast<size_t>(i) * 11 + j];
                    vx += wt * dx * dx;
                    vy += wt * dy * dy;
                    cov += wt * dx * dy;
                }
            const double lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            const double cs = (2.0 * cov + c2) / (vx + vy + c2);
            acc_ssim += lum * cs;
            acc_cs += cs;
            ++count;
        }
    }
    return {acc_ssim / count, acc_cs / count};
}

RealImage oracle_half(const RealImage& img) {
    RealImage out(img.height / 2, img.width / 2);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            out.at(r, c) = (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) +
                            img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1)) /
                           4.0;
    return out;
}

double oracle_ms_ssim(RealImage x, RealImage y, double range, int scales) {
    const double base_w[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int m = 0;
    {
        int h = x.height, w = x.width;
        while (m < scales && h >= 11 && w >= 11) {
            ++m;
            h /= 2;
            w /= 2;
        }
    }
    double wsum = 0.0;
    for (int j = 0; j < m; ++j) wsum += base_w[j];
    double value = 1.0;
    for (int j = 0; j < m; ++j) {
        OracleSsim t = oracle_ssim_terms(x, y, range);
        const double term = (j == m - 1) ? t.mean_ssim : t.mean_cs;
        value *= std::pow(std::max(term, 0.0), base_w[j] / wsum);
        if (j + 1 < m) {
            x = oracle_half(x);
            y = oracle_half(y);
        }
    }
    return value;
}

void check_metric_fidelity() {
    Rng rng(99);
    const int n = 64;
    RealImage a(n, n), b(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            a.at(r, c) = 0.5 + 0.2 * std::sin(0.37 * r) + 0.1 * rng.normal();
            b.at(r, c) = 0.9 * a.at(r, c) + 0.05 + 0.05 * rng.normal();
        }

    const double range = 1.0;
    const double ssim_err = std::abs(ssim(a, b, range) - oracle_ssim_terms(a, b, range).mean_ssim);
    const double ms_err = std::abs(ms_ssim(a, b, range, 3) - oracle_ms_ssim(a, b, range, 3));

    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    const double psnr_err = std::abs(psnr(a, b, range) - 10.0 * std::log10(range * range / mse));

    const bool self_one = ssim(a, a, range) == 1.0;
    const double single_scale = std::abs(ms_ssim(a, b, range, 1) - ssim(a, b, range));

    const bool ok =
        ssim_err < 1e-6 && ms_err < 1e-6 && psnr_err < 1e-6 && self_one && single_scale < 1e-12;
    report("08 metric-fidelity", ok,
           fmt("oracle diffs: ssim %.2e, ms-ssim %.2e, psnr %.2e (< 1e-6); ssim(x,x)=1 %s; "
               "1-scale ms-ssim == ssim diff %.2e",
               ssim_err, ms_err, psnr_err, self_one ? "exact" : "VIOLATED", single_scale));
}

// ------------------------------------------------------------------ 09

void check_radam_rectification() {
    const double beta2 = 0.999;
    const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    bool match = std::abs(radam_rho_inf(beta2) - rho_inf) < 1e-9;
    int analytic_switch = 0;
    double p = 1.0;
    for (int t = 1; t <= 50; ++t) {
        p *= beta2;
        const double rho_t = rho_inf - 2.0 * t * p / (1.0 - p);
        if (analytic_switch == 0 && rho_t > 4.0) analytic_switch = t;
        match = match && std::abs(radam_rho_t(beta2, t) - rho_t) < 1e-9 &&
                radam_rectified(beta2, t) == (rho_t > 4.0);
    }
    const bool ok = match && analytic_switch == 5;
    report("09 radam-rectification", ok,
           fmt("variance-rectified branch first taken at step %d (analytic: 5), "
               "rho matches analytic recursion for t=1..50",
               analytic_switch));
}

// ------------------------------------------------------------------ 10

std::string slurp_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.max_steps = 4;
    cfg.seed = 11;
    cfg.accel = 2;
    cfg.acs = 4;
    cfg.data.n_slices = 4;
    cfg.data.image_size = 16;
    cfg.data.coils = 2;
    cfg.model.n_unrolled = 1;
    cfg.model.buffer_size = 2;
    cfg.model.mwcnn.scales = 2;
    cfg.model.mwcnn.filters = {4, 8};
    cfg.model.mwcnn.blocks_per_scale = 1;
    cfg.model.unet.depth = 2;
    cfg.model.unet.base_filters = 4;
    return cfg;
}

void check_determinism_and_formats() {
    const fs::path dir =
        fs::temp_directory_path() / ("mri_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };

    // fixed-seed training twice -> bit-identical checkpoint files
    TrainConfig cfg = tiny_train_config();
    cfg.ckpt_path = p("a.ckpt");
    ParamStore ps1;
    train(cfg, ps1);
    cfg.ckpt_path = p("b.ckpt");
    ParamStore ps2;
    train(cfg, ps2);
    const std::string ck_a = slurp_bytes(p("a.ckpt"));
    const std::string ck_b = slurp_bytes(p("b.ckpt"));
    const bool identical = !ck_a.empty() && ck_a == ck_b;

    // k-space container: value round trip plus byte-identical rewrite
    ComplexImage truth = make_phantom(16);
    ForwardOperator op;
    op.mask = make_mask(16, 16, 2, 4, 0);
    op.maps = make_coil_maps(16, 2);
    KspVolume vol = KspVolume::from_coils(apply_forward(op, truth));
    write_ksp(p("v.ksp"), vol);
    KspVolume vol2 = read_ksp(p("v.ksp"));
    bool ksp_ok = vol2.numel() == vol.numel();
    for (size_t i = 0; ksp_ok && i < vol.data.size(); ++i) ksp_ok = vol2.data[i] == vol.data[i];
    write_ksp(p("v2.ksp"), vol2);
    ksp_ok = ksp_ok && slurp_bytes(p("v.ksp")) == slurp_bytes(p("v2.ksp"));

    // sampling mask
    write_mask(p("m.msk"), op.mask);
    SamplingMask m2 = read_mask(p("m.msk"));
    bool mask_ok = m2.line_selected == op.mask.line_selected && m2.acs_count == op.mask.acs_count &&
                   m2.acceleration == op.mask.acceleration && m2.width == op.mask.width;
    write_mask(p("m2.msk"), m2);
    mask_ok = mask_ok && slurp_bytes(p("m.msk")) == slurp_bytes(p("m2.msk"));

    // sensitivity maps
    write_maps(p("s.smp"), op.maps);
    SensitivitySet s2 = read_maps(p("s.smp"));
    bool maps_ok = s2.data == op.maps.data;
    write_maps(p("s2.smp"), s2);
    maps_ok = maps_ok && slurp_bytes(p("s.smp")) == slurp_bytes(p("s2.smp"));

    // checkpoint: read-back then rewrite reproduces the original bytes
    Checkpoint ck = read_checkpoint(p("a.ckpt"));
    write_checkpoint(p("c.ckpt"), ck);
    const bool ckpt_ok = slurp_bytes(p("c.ckpt")) == ck_a;

    // 16-bit preview: writing a read-back image is byte-stable
    write_pgm16(p("i.pgm"), magnitude(truth));
    write_pgm16(p("i2.pgm"), read_pgm16(p("i.pgm")));
    const bool pgm_ok = slurp_bytes(p("i.pgm")) == slurp_bytes(p("i2.pgm"));

    // corrupted files raise typed errors
    bool typed_ok = true;
    {
        std::string bad = ck_a;
        bad[bad.size() / 2] = static_cast<char>(~bad[bad.size() / 2]);
        spit_bytes(p("bad.ckpt"), bad);
        try {
            read_checkpoint(p("bad.ckpt"));
            typed_ok = false;
        } catch (const DataFormatError& e) {
            typed_ok = typed_ok && e.kind() == DataFormatError::Kind::bad_crc;
        }
    }
    {
        std::string bytes = slurp_bytes(p("v.ksp"));
        spit_bytes(p("cut.ksp"), bytes.substr(0, bytes.size() - 9));
        try {
            read_ksp(p("cut.ksp"));
            typed_ok = false;
        } catch (const DataFormatError& e) {
            typed_ok = typed_ok && e.kind() == DataFormatError::Kind::truncated;
        }
    }
    {
        std::string bytes = slurp_bytes(p("m.msk"));
        bytes[0] = 'X';
        spit_bytes(p("bad.msk"), bytes);
        try {
            read_mask(p("bad.msk"));
            typed_ok = false;
        } catch (const DataFormatError& e) {
            typed_ok = typed_ok && e.kind() == DataFormatError::Kind::bad_magic;
        }
    }

    fs::remove_all(dir);
    const bool ok = identical && ksp_ok && mask_ok && maps_ok && ckpt_ok && pgm_ok && typed_ok;
    report("10 determinism-and-formats", ok,
           fmt("same-seed checkpoints identical: %s; round trips ksp %s, mask %s, maps %s, "
               "ckpt %s, pgm %s; typed corruption errors: %s",
               identical ? "yes" : "NO", ksp_ok ? "ok" : "FAIL", mask_ok ? "ok" : "FAIL",
               maps_ok ? "ok" : "FAIL", ckpt_ok ? "ok" : "FAIL", pgm_ok ? "ok" : "FAIL",
               typed_ok ? "ok" : "FAIL"));
}

void guarded(void (*fn)(), const char* name) {
    try {
        fn();
    } catch (const std::exception& e) {
        report(name, false, fmt("unexpected exception: %s", e.what()));
    }
}

} // namespace

int main() {
    std::printf("acceptance checks\n");
    guarded(check_adjoint_identity, "01 adjoint-identity");
    guarded(check_unitarity_round_trip, "02 unitarity-round-trip");
    guarded(check_gradients, "03 gradient-checks");
    try {
        Timer bench_timer;
        BenchPoint b4 = run_bench(4, 16);
        const double bench_seconds = bench_timer.seconds();
        BenchPoint b8 = run_bench(8, 8);
        check_pdhg_beats_zero_filled(b4, bench_seconds);
        check_acceleration_monotonicity(b4, b8);
    } catch (const std::exception& e) {
        report("04 pdhg-beats-zero-filled", false, fmt("unexpected exception: %s", e.what()));
        report("05 acceleration-monotonicity", false, "benchmark failed to run");
    }
    guarded(check_identity_at_init, "06 identity-at-init");
    guarded(check_desk_scale_learning, "07 desk-scale-learning");
    guarded(check_metric_fidelity, "08 metric-fidelity");
    guarded(check_radam_rectification, "09 radam-rectification");
    guarded(check_determinism_and_formats, "10 determinism-and-formats");

    std::printf("acceptance: %d/10 passed\n", 10 - g_failures);
    return g_failures;
}

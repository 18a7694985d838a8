#pragma once

#include <string>
#include <vector>

#include "mri/types.hpp"

namespace mri {

/// SSIM constants (Wang et al. convention): 11x11 Gaussian window with
/// sigma 1.5, k1 = 0.01, k2 = 0.03.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Standard 5-scale MS-SSIM exponents from the multi-scale SSIM construction
/// (these come from the cited metric definition, not from this work).
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Normalized 11x11 Gaussian window, row-major.
std::vector<double> ssim_window();

/// Mean absolute difference.
double l1_loss(const RealImage& pred, const RealImage& target);

/// 10 log10(data_range^2 / MSE); +infinity when MSE == 0.
/// data_range <= 0 means "use max of target".
double psnr(const RealImage& pred, const RealImage& target, double data_range = 0.0);

/// PSNR capped at 100 dB, the convention used in metric CSV files.
double psnr_capped(const RealImage& pred, const RealImage& target, double data_range = 0.0);

/// Mean local SSIM over the valid (un-padded) window positions.
double ssim(const RealImage& pred, const RealImage& target, double data_range = 0.0);

/// Multi-scale SSIM: contrast-structure means at every scale but the last,
/// full SSIM at the coarsest, combined as a weighted product (terms clamped
/// at zero). Scales shrink automatically when the image is too small for 5
/// halvings under the 11x11 window; weights are renormalized to sum 1.
double ms_ssim(const RealImage& pred, const RealImage& target, double data_range = 0.0,
               int scales = 5);

/// Number of usable MS-SSIM scales for an image size (window fits everywhere).
int ms_ssim_scale_count(int height, int width, int requested = 5);

/// alpha * l1 + beta * (1 - ms_ssim), the evaluation-side compound loss.
double compound_loss(const RealImage& pred, const RealImage& target, double alpha = 0.5,
                     double beta = 0.5, double data_range = 0.0);

/// Magnitude image of a complex image.
RealImage magnitude(const ComplexImage& img);

/// One row of the metrics CSV (schema: volume_id, slice, method, accel,
/// psnr_db, ssim, ms_ssim).
struct MetricsRow {
    std::string volume_id;
    int slice = 0;
    std::string method;
    int accel = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double ms_ssim = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

} // namespace mri

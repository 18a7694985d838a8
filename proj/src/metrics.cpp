#include "mri/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace mri {
namespace {

void check_same_shape(const RealImage& a, const RealImage& b, const char* who) {
    if (a.height != b.height || a.width != b.width)
        throw InvalidInputError(std::string(who) + ": shape mismatch");
}

double default_range(const RealImage& target, double data_range) {
    if (data_range > 0.0) return data_range;
    double m = 0.0;
    for (double v : target.data) m = std::max(m, std::fabs(v));
    if (m <= 0.0) throw InvalidConfigError("data_range must be positive (target is all zero)");
    return m;
}

// Valid-mode windowed mean: output is (H-k+1) x (W-k+1).
RealImage window_filter(const RealImage& img, const std::vector<double>& win, int k) {
    RealImage out(img.height - k + 1, img.width - k + 1);
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) {
                const double* row = &img.at(r + i, c);
                const double* wrow = &win[static_cast<size_t>(i) * k];
                for (int j = 0; j < k; ++j) acc += wrow[j] * row[j];
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

// 2x2 block average; odd trailing row/column is dropped.
RealImage downsample2(const RealImage& img) {
    RealImage out(img.height / 2, img.width / 2);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            out.at(r, c) = 0.25 * (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) +
                                   img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1));
    return out;
}

struct SsimTerms {
    double luminance_cs = 0.0; // mean of l*cs map (plain SSIM)
    double cs = 0.0;           // mean of cs map
};

SsimTerms ssim_terms(const RealImage& x, const RealImage& y, double data_range) {
    const int k = kSsimWindow;
    if (x.height < k || x.width < k)
        throw InvalidInputError("ssim: image smaller than the 11x11 window");

    const std::vector<double> win = ssim_window();
    RealImage x2(x.height, x.width), y2(x.height, x.width), xy(x.height, x.width);
    for (size_t i = 0; i < x.numel(); ++i) {
        x2.data[i] = x.data[i] * x.data[i];
        y2.data[i] = y.data[i] * y.data[i];
        xy.data[i] = x.data[i] * y.data[i];
    }
    RealImage mx = window_filter(x, win, k);
    RealImage my = window_filter(y, win, k);
    RealImage mxx = window_filter(x2, win, k);
    RealImage myy = window_filter(y2, win, k);
    RealImage mxy = window_filter(xy, win, k);

    const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
    const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);

    double sum_lcs = 0.0, sum_cs = 0.0;
    for (size_t i = 0; i < mx.numel(); ++i) {
        const double mu_x = mx.data[i], mu_y = my.data[i];
        const double var_x = mxx.data[i] - mu_x * mu_x;
        const double var_y = myy.data[i] - mu_y * mu_y;
        const double cov = mxy.data[i] - mu_x * mu_y;
        const double l = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1);
        const double cs = (2.0 * cov + c2) / (var_x + var_y + c2);
        sum_lcs += l * cs;
        sum_cs += cs;
    }
    const double n = static_cast<double>(mx.numel());
    return {sum_lcs / n, sum_cs / n};
}

} // namespace

std::vector<double> ssim_window() {
    const int k = kSsimWindow;
    std::vector<double> win(static_cast<size_t>(k) * k);
    const double center = (k - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const double d2 = (i - center) * (i - center) + (j - center) * (j - center);
            win[static_cast<size_t>(i) * k + j] = std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
            sum += win[static_cast<size_t>(i) * k + j];
        }
    }
    for (double& v : win) v /= sum;
    return win;
}

double l1_loss(const RealImage& pred, const RealImage& target) {
    check_same_shape(pred, target, "l1_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred.numel(); ++i) acc += std::fabs(pred.data[i] - target.data[i]);
    return acc / static_cast<double>(pred.numel());
}

double psnr(const RealImage& pred, const RealImage& target, double data_range) {
    check_same_shape(pred, target, "psnr");
    const double dr = default_range(target, data_range);
    double mse = 0.0;
    for (size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data[i] - target.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(dr * dr / mse);
}

double psnr_capped(const RealImage& pred, const RealImage& target, double data_range) {
    return std::min(psnr(pred, target, data_range), 100.0);
}

double ssim(const RealImage& pred, const RealImage& target, double data_range) {
    check_same_shape(pred, target, "ssim");
    const double dr = default_range(target, data_range);
    return ssim_terms(pred, target, dr).luminance_cs;
}

int ms_ssim_scale_count(int height, int width, int requested) {
    int m = 0;
    int h = height, w = width;
    while (m < requested && h >= kSsimWindow && w >= kSsimWindow) {
        ++m;
        h /= 2;
        w /= 2;
    }
    return m;
}

double ms_ssim(const RealImage& pred, const RealImage& target, double data_range, int scales) {
    check_same_shape(pred, target, "ms_ssim");
    if (scales < 1 || scales > 5) throw InvalidConfigError("ms_ssim: scales must be in [1, 5]");
    const double dr = default_range(target, data_range);

    const int m = ms_ssim_scale_count(pred.height, pred.width, scales);
    if (m < 1) throw InvalidInputError("ms_ssim: image smaller than the 11x11 window");

    double wsum = 0.0;
    for (int j = 0; j < m; ++j) wsum += kMsSsimWeights[j];

    RealImage x = pred, y = target;
    double value = 1.0;
    for (int j = 0; j < m; ++j) {
        const double wj = kMsSsimWeights[j] / wsum;
        SsimTerms t = ssim_terms(x, y, dr);
        const double term = (j == m - 1) ? t.luminance_cs : t.cs;
        value *= std::pow(std::max(term, 0.0), wj);
        if (j + 1 < m) {
            x = downsample2(x);
            y = downsample2(y);
        }
    }
    return value;
}

double compound_loss(const RealImage& pred, const RealImage& target, double alpha, double beta,
                     double data_range) {
    return alpha * l1_loss(pred, target) + beta * (1.0 - ms_ssim(pred, target, data_range));
}

RealImage magnitude(const ComplexImage& img) {
    RealImage out(img.height, img.width);
    for (size_t i = 0; i < img.numel(); ++i) out.data[i] = std::abs(img.data[i]);
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataFormatError(DataFormatError::Kind::bad_field, "cannot open " + path);
    out << "volume_id,slice,method,accel,psnr_db,ssim,ms_ssim\n";
    out.precision(10);
    for (const auto& r : rows)
        out << r.volume_id << ',' << r.slice << ',' << r.method << ',' << r.accel << ','
            << r.psnr_db << ',' << r.ssim << ',' << r.ms_ssim << '\n';
}

} // namespace mri

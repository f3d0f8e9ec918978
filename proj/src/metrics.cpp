#include "masc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace masc::metrics {

namespace {

void check_sizes(std::span<const float> x, std::span<const float> y, const char* op) {
    if (x.size() != y.size())
        throw std::invalid_argument(std::string(op) + ": image sizes differ (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                                    ")");
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> win(size);
    const double c = (size - 1) / 2.0;
    double total = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        win[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += win[i];
    }
    for (auto& v : win) v /= total;
    return win;
}

// Valid-mode separable correlation; in is h*w, out is (h-k+1)*(w-k+1).
void filter_valid(const std::vector<double>& in, int h, int w, const std::vector<double>& win,
                  std::vector<double>& out) {
    const int k = static_cast<int>(win.size());
    const int oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += win[t] * in[static_cast<size_t>(i) * w + j + t];
            tmp[static_cast<size_t>(i) * ow + j] = acc;
        }
    out.assign(static_cast<size_t>(oh) * ow, 0.0);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += win[t] * tmp[static_cast<size_t>(i + t) * ow + j];
            out[static_cast<size_t>(i) * ow + j] = acc;
        }
}

}  // namespace

double ssim(std::span<const float> x, std::span<const float> y, int h, int w,
            const QualityConfig& cfg) {
    check_sizes(x, y, "ssim");
    if (static_cast<size_t>(h) * w != x.size())
        throw std::invalid_argument("ssim: extents do not match image size");
    if (cfg.ssim_window % 2 == 0) throw std::invalid_argument("ssim: window size must be odd");
    if (h < cfg.ssim_window || w < cfg.ssim_window)
        throw std::invalid_argument("ssim: image smaller than window");
    const auto win = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
    const size_t n = x.size();
    std::vector<double> xd(n), yd(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xd[i] = x[i];
        yd[i] = y[i];
        xx[i] = xd[i] * xd[i];
        yy[i] = yd[i] * yd[i];
        xy[i] = xd[i] * yd[i];
    }
    std::vector<double> mx, my, mxx, myy, mxy;
    filter_valid(xd, h, w, win, mx);
    filter_valid(yd, h, w, win, my);
    filter_valid(xx, h, w, win, mxx);
    filter_valid(yy, h, w, win, myy);
    filter_valid(xy, h, w, win, mxy);
    const double c1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
    const double c2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);
    double total = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(mx.size());
}

double mse(std::span<const float> x, std::span<const float> y) {
    check_sizes(x, y, "mse");
    double acc = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - y[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double mae(std::span<const float> x, std::span<const float> y) {
    check_sizes(x, y, "mae");
    double acc = 0;
    for (size_t i = 0; i < x.size(); ++i) acc += std::fabs(static_cast<double>(x[i]) - y[i]);
    return acc / static_cast<double>(x.size());
}

double nmse(std::span<const float> x, std::span<const float> y) {
    check_sizes(x, y, "nmse");
    double num = 0, den = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - y[i];
        num += d * d;
        den += static_cast<double>(y[i]) * y[i];
    }
    if (den == 0.0) throw std::invalid_argument("nmse: reference image has zero norm");
    return num / den;
}

double psnr(std::span<const float> x, std::span<const float> y, double data_range) {
    const double e = mse(x, y);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / e);
}

double quality(std::span<const float> img, std::span<const float> reference, int h, int w,
               const QualityConfig& cfg) {
    return cfg.lambda_ssim * ssim(img, reference, h, w, cfg) +
           cfg.lambda_nmse * (1.0 - nmse(img, reference));
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    const double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("paired_t_test: sample vectors differ in length");
    const size_t n = a.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
    double mean = 0;
    for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    TTestResult r;
    if (var == 0.0) {
        if (mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    const double se = std::sqrt(var / static_cast<double>(n));
    r.t = mean / se;
    const double dof = static_cast<double>(n - 1);
    const double x = dof / (dof + r.t * r.t);
    r.p = incomplete_beta(dof / 2.0, 0.5, x);
    return r;
}

}  // namespace masc::metrics

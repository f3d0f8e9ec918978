#pragma once

// Image quality metrics and the composite acquisition quality score.
// All statistics accumulate in double regardless of input precision.

#include <span>
#include <vector>

namespace masc::metrics {

struct QualityConfig {
    double lambda_ssim = 0.5;
    double lambda_nmse = 0.5;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

// Mean of the local SSIM map; Gaussian-weighted valid-mode windows.
double ssim(std::span<const float> x, std::span<const float> y, int h, int w,
            const QualityConfig& cfg = {});

double mse(std::span<const float> x, std::span<const float> y);
double mae(std::span<const float> x, std::span<const float> y);
// ||x - y||^2 / ||y||^2; y is the reference.
double nmse(std::span<const float> x, std::span<const float> y);
// 10*log10(range^2/mse); +inf for identical inputs (tables cap at 99.0).
double psnr(std::span<const float> x, std::span<const float> y, double data_range = 1.0);

// Q = lambda_ssim * SSIM + lambda_nmse * (1 - NMSE).
double quality(std::span<const float> img, std::span<const float> reference, int h, int w,
               const QualityConfig& cfg = {});

struct TTestResult {
    double t = 0.0;
    double p = 1.0;  // two-sided
};

// Paired t-test. Zero-variance differences: p=0 if the mean difference is
// nonzero, else p=1.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta function I_x(a, b) via Lentz continued
// fractions; exposed for the t-distribution CDF.
double incomplete_beta(double a, double b, double x);

constexpr double kPsnrCap = 99.0;

}  // namespace masc::metrics

#pragma once

// Residual metal-artifact-reduction network g(I) = I + r(I): an
// encoder-decoder with skip connections, plus its pretraining and
// fine-tuning losses. Loss functions are precision-templated so gradient
// checks can run at 64 bit.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "masc/ops.hpp"
#include "masc/tensor.hpp"

namespace masc::marnet {

enum class NormKind { Instance, None };

struct MarConfig {
    int depth = 3;          // down/up stages; paper-scale option is 4
    int base_channels = 16; // doubles per stage; paper-scale option is 64
    NormKind norm = NormKind::Instance;
};

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

// Differentiable mean SSIM over [N,1,H,W]; same definition as the metrics
// module (Gaussian-weighted valid-mode local statistics).
template <typename S>
diff::TensorT<S> ssim_mean(const diff::TensorT<S>& x, const diff::TensorT<S>& y,
                           const SsimParams& p = {}) {
    namespace d = masc::diff;
    const auto win = d::gaussian_window<S>(p.window, p.sigma);
    const S c1 = static_cast<S>((p.k1 * p.data_range) * (p.k1 * p.data_range));
    const S c2 = static_cast<S>((p.k2 * p.data_range) * (p.k2 * p.data_range));
    auto mx = d::gauss_filter_valid(x, win);
    auto my = d::gauss_filter_valid(y, win);
    auto mxx = d::gauss_filter_valid(d::mul(x, x), win);
    auto myy = d::gauss_filter_valid(d::mul(y, y), win);
    auto mxy = d::gauss_filter_valid(d::mul(x, y), win);
    auto vx = d::sub(mxx, d::mul(mx, mx));
    auto vy = d::sub(myy, d::mul(my, my));
    auto cov = d::sub(mxy, d::mul(mx, my));
    auto num = d::mul(d::add_scalar(d::mul_scalar(d::mul(mx, my), S(2)), c1),
                      d::add_scalar(d::mul_scalar(cov, S(2)), c2));
    auto den = d::mul(d::add_scalar(d::add(d::mul(mx, mx), d::mul(my, my)), c1),
                      d::add_scalar(d::add(vx, vy), c2));
    return d::mean_all(d::div(num, den));
}

struct PretrainLossConfig {
    float lambda_ssim = 0.5f;  // weight on (1 - SSIM); L1 weight is 1
    SsimParams ssim;
};

// L1 + lambda * (1 - SSIM)
template <typename S>
diff::TensorT<S> pretrain_loss(const diff::TensorT<S>& pred, const diff::TensorT<S>& target,
                               const PretrainLossConfig& cfg = {}) {
    namespace d = masc::diff;
    auto l1 = d::mean_all(d::abs(d::sub(pred, target)));
    if (cfg.lambda_ssim == 0.0f) return l1;
    auto dssim = d::add_scalar(d::neg(ssim_mean(pred, target, cfg.ssim)), S(1));
    return d::add(l1, d::mul_scalar(dssim, static_cast<S>(cfg.lambda_ssim)));
}

// Plain MSE for Stage-2 fine-tuning.
template <typename S>
diff::TensorT<S> finetune_loss(const diff::TensorT<S>& pred, const diff::TensorT<S>& target) {
    namespace d = masc::diff;
    return d::mean_all(d::square(d::sub(pred, target)));
}

class MarNet {
public:
    MarNet(const MarConfig& cfg, std::mt19937_64& rng);

    // x is [N,1,H,W]; H and W must be divisible by 2^depth.
    diff::Tensor forward(const diff::Tensor& x) const;

    // Tape-free convenience for single images (same math, graph discarded).
    std::vector<float> apply(const std::vector<float>& image, int h, int w) const;

    std::vector<diff::Tensor>& parameters() { return params_; }
    const std::vector<diff::Tensor>& parameters() const { return params_; }
    std::vector<std::pair<std::string, diff::Tensor>> named_parameters() const;
    const MarConfig& config() const { return cfg_; }

private:
    struct Block {  // two 3x3 convs, optional per-conv instance norm
        diff::Tensor w1, b1, g1, be1;
        diff::Tensor w2, b2, g2, be2;
    };
    diff::Tensor run_block(const Block& blk, const diff::Tensor& x) const;

    MarConfig cfg_;
    Block inc_;
    std::vector<Block> down_, up_;
    diff::Tensor outc_w_, outc_b_;  // zero-initialized: identity at start
    std::vector<diff::Tensor> params_;
};

}  // namespace masc::marnet

#include "masc/marnet.hpp"

#include <stdexcept>

#include "masc/optim.hpp"

namespace masc::marnet {

namespace d = masc::diff;

namespace {

d::Tensor make_conv_weight(int co, int ci, int k, std::mt19937_64& rng) {
    auto w = d::Tensor::zeros({co, ci, k, k});
    d::kaiming_uniform(w, ci * k * k, rng);
    return w;
}

}  // namespace

MarNet::MarNet(const MarConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.depth < 1 || cfg.base_channels < 1)
        throw std::invalid_argument("MarNet: depth and base channels must be positive");
    const bool norm = cfg.norm == NormKind::Instance;
    auto make_block = [&](int ci, int co) {
        Block b;
        b.w1 = make_conv_weight(co, ci, 3, rng);
        b.b1 = d::Tensor::zeros({co});
        b.w2 = make_conv_weight(co, co, 3, rng);
        b.b2 = d::Tensor::zeros({co});
        if (norm) {
            b.g1 = d::Tensor::filled({co}, 1.0f);
            b.be1 = d::Tensor::zeros({co});
            b.g2 = d::Tensor::filled({co}, 1.0f);
            b.be2 = d::Tensor::zeros({co});
        }
        return b;
    };
    const int c0 = cfg.base_channels;
    inc_ = make_block(1, c0);
    for (int s = 1; s <= cfg.depth; ++s) down_.push_back(make_block(c0 << (s - 1), c0 << s));
    for (int s = cfg.depth; s >= 1; --s) {
        // up stage s consumes the upsampled features plus the skip
        const int skip = c0 << (s - 1);
        up_.push_back(make_block((c0 << s) + skip, skip));
    }
    outc_w_ = d::Tensor::zeros({1, c0, 1, 1});
    outc_b_ = d::Tensor::zeros({1});

    auto push_block = [&](Block& b) {
        params_.push_back(b.w1);
        params_.push_back(b.b1);
        params_.push_back(b.w2);
        params_.push_back(b.b2);
        if (norm) {
            params_.push_back(b.g1);
            params_.push_back(b.be1);
            params_.push_back(b.g2);
            params_.push_back(b.be2);
        }
    };
    push_block(inc_);
    for (auto& b : down_) push_block(b);
    for (auto& b : up_) push_block(b);
    params_.push_back(outc_w_);
    params_.push_back(outc_b_);
}

d::Tensor MarNet::run_block(const Block& blk, const d::Tensor& x) const {
    auto h = d::conv2d(x, blk.w1, blk.b1);
    if (cfg_.norm == NormKind::Instance) h = d::instance_norm(h, blk.g1, blk.be1);
    h = d::relu(h);
    h = d::conv2d(h, blk.w2, blk.b2);
    if (cfg_.norm == NormKind::Instance) h = d::instance_norm(h, blk.g2, blk.be2);
    return d::relu(h);
}

d::Tensor MarNet::forward(const d::Tensor& x) const {
    if (x.shape().size() != 4 || x.shape()[1] != 1)
        d::op_error("MarNet::forward", "expected [N,1,H,W], got " + d::shape_str(x.shape()));
    const int div = 1 << cfg_.depth;
    if (x.shape()[2] % div || x.shape()[3] % div)
        d::op_error("MarNet::forward", "extents " + d::shape_str(x.shape()) +
                                           " not divisible by 2^depth = " + std::to_string(div));
    std::vector<d::Tensor> skips;
    auto h = run_block(inc_, x);
    for (int s = 0; s < cfg_.depth; ++s) {
        skips.push_back(h);
        h = run_block(down_[s], d::maxpool2(h));
    }
    for (int s = 0; s < cfg_.depth; ++s) {
        h = d::upsample_bilinear2(h);
        h = run_block(up_[s], d::concat_channels(h, skips[cfg_.depth - 1 - s]));
    }
    auto residual = d::conv2d(h, outc_w_, outc_b_);
    return d::add(x, residual);
}

std::vector<float> MarNet::apply(const std::vector<float>& image, int h, int w) const {
    auto x = d::Tensor::from({1, 1, h, w}, std::vector<float>(image.begin(), image.end()));
    return forward(x).values();
}

std::vector<std::pair<std::string, d::Tensor>> MarNet::named_parameters() const {
    std::vector<std::pair<std::string, d::Tensor>> out;
    const bool norm = cfg_.norm == NormKind::Instance;
    auto add_block = [&](const std::string& prefix, const Block& b) {
        out.emplace_back(prefix + ".w1", b.w1);
        out.emplace_back(prefix + ".b1", b.b1);
        out.emplace_back(prefix + ".w2", b.w2);
        out.emplace_back(prefix + ".b2", b.b2);
        if (norm) {
            out.emplace_back(prefix + ".g1", b.g1);
            out.emplace_back(prefix + ".be1", b.be1);
            out.emplace_back(prefix + ".g2", b.g2);
            out.emplace_back(prefix + ".be2", b.be2);
        }
    };
    add_block("inc", inc_);
    for (size_t i = 0; i < down_.size(); ++i) add_block("down" + std::to_string(i + 1), down_[i]);
    for (size_t i = 0; i < up_.size(); ++i) add_block("up" + std::to_string(i + 1), up_[i]);
    out.emplace_back("outc.w", outc_w_);
    out.emplace_back("outc.b", outc_b_);
    return out;
}

}  // namespace masc::marnet

#include "masc/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "masc/optim.hpp"

namespace masc::policies {

namespace d = masc::diff;

BaselineKind baseline_from_name(const std::string& name) {
    if (name == "center-out") return BaselineKind::CenterOut;
    if (name == "random") return BaselineKind::Random;
    if (name == "random-lowbias") return BaselineKind::RandomLowBias;
    if (name == "equispaced") return BaselineKind::Equispaced;
    throw std::invalid_argument("unknown baseline policy: " + name);
}

std::string baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::CenterOut: return "center-out";
        case BaselineKind::Random: return "random";
        case BaselineKind::RandomLowBias: return "random-lowbias";
        case BaselineKind::Equispaced: return "equispaced";
    }
    return "?";
}

std::vector<int> equispaced_order(int n_pe, int total_lines) {
    std::vector<int> order;
    order.reserve(total_lines);
    for (int j = 0; j < total_lines; ++j) {
        const int idx = static_cast<int>(std::llround(static_cast<double>(j) * n_pe / total_lines));
        order.push_back(std::min(idx, n_pe - 1));
    }
    return order;
}

namespace {

int center_out_line(const fourier::LineMask& mask) {
    const int n = mask.size(), dc = n / 2;
    int best = -1, best_d = n + 1;
    for (int j = 0; j < n; ++j) {
        if (mask.is_acquired(j)) continue;
        const int dj = std::abs(j - dc);
        if (dj < best_d) {
            best = j;
            best_d = dj;
        }
    }
    return best;
}

}  // namespace

int baseline_next_line(BaselineKind kind, const fourier::LineMask& mask, std::mt19937_64& rng,
                       int total_lines) {
    const int n = mask.size();
    if (mask.popcount() >= n)
        throw std::logic_error("baseline_next_line: every line already acquired");
    switch (kind) {
        case BaselineKind::CenterOut:
            return center_out_line(mask);
        case BaselineKind::Random: {
            std::vector<int> avail;
            for (int j = 0; j < n; ++j)
                if (!mask.is_acquired(j)) avail.push_back(j);
            std::uniform_int_distribution<size_t> pick(0, avail.size() - 1);
            return avail[pick(rng)];
        }
        case BaselineKind::RandomLowBias: {
            const double dc = n / 2.0, sigma = n / 4.0;
            std::vector<double> weights;
            std::vector<int> avail;
            for (int j = 0; j < n; ++j) {
                if (mask.is_acquired(j)) continue;
                avail.push_back(j);
                const double z = (j - dc) / sigma;
                weights.push_back(std::exp(-0.5 * z * z));
            }
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            double total = 0;
            for (double w : weights) total += w;
            double u = unit(rng) * total;
            for (size_t i = 0; i < avail.size(); ++i) {
                u -= weights[i];
                if (u <= 0) return avail[i];
            }
            return avail.back();
        }
        case BaselineKind::Equispaced: {
            for (int idx : equispaced_order(n, total_lines))
                if (!mask.is_acquired(idx)) return idx;
            // pattern exhausted (overlap with the initial mask): fall back to
            // center-out so the episode can still complete
            return center_out_line(mask);
        }
    }
    throw std::logic_error("baseline_next_line: unreachable");
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) : cfg(config) {
    if (cfg.h % 8 || cfg.w % 8)
        throw std::invalid_argument("Encoder: observation extents must be divisible by 8");
    auto conv = [&](int co, int ci) {
        auto w = d::Tensor::zeros({co, ci, 3, 3});
        d::kaiming_uniform(w, ci * 9, rng);
        return w;
    };
    w1 = conv(cfg.c1, 2);
    b1 = d::Tensor::zeros({cfg.c1});
    w2 = conv(cfg.c2, cfg.c1);
    b2 = d::Tensor::zeros({cfg.c2});
    w3 = conv(cfg.c3, cfg.c2);
    b3 = d::Tensor::zeros({cfg.c3});
    if (cfg.norm == NormKind::Instance) {
        g1 = d::Tensor::filled({cfg.c1}, 1.0f);
        be1 = d::Tensor::zeros({cfg.c1});
        g2 = d::Tensor::filled({cfg.c2}, 1.0f);
        be2 = d::Tensor::zeros({cfg.c2});
        g3 = d::Tensor::filled({cfg.c3}, 1.0f);
        be3 = d::Tensor::zeros({cfg.c3});
    }
}

int Encoder::feature_dim() const { return cfg.c3 * (cfg.h / 8) * (cfg.w / 8); }

d::Tensor Encoder::forward(const d::Tensor& obs) const {
    if (obs.shape().size() != 4 || obs.shape()[1] != 2 || obs.shape()[2] != cfg.h ||
        obs.shape()[3] != cfg.w)
        d::op_error("Encoder::forward", "expected [N,2," + std::to_string(cfg.h) + "," +
                                            std::to_string(cfg.w) + "], got " +
                                            d::shape_str(obs.shape()));
    const bool norm = cfg.norm == NormKind::Instance;
    auto block = [&](const d::Tensor& x, const d::Tensor& w, const d::Tensor& b,
                     const d::Tensor& g, const d::Tensor& be) {
        auto h = d::conv2d(x, w, b);
        if (norm) h = d::instance_norm(h, g, be);
        return d::maxpool2(d::relu(h));
    };
    auto h = block(obs, w1, b1, g1, be1);
    h = block(h, w2, b2, g2, be2);
    h = block(h, w3, b3, g3, be3);
    return d::reshape(h, {obs.shape()[0], feature_dim()});
}

void Encoder::collect(std::vector<d::Tensor>& params) const {
    for (const auto& t : {w1, b1, w2, b2, w3, b3}) params.push_back(t);
    if (cfg.norm == NormKind::Instance)
        for (const auto& t : {g1, be1, g2, be2, g3, be3}) params.push_back(t);
}

void Encoder::collect_named(const std::string& prefix,
                            std::vector<std::pair<std::string, d::Tensor>>& out) const {
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".b1", b1);
    out.emplace_back(prefix + ".w2", w2);
    out.emplace_back(prefix + ".b2", b2);
    out.emplace_back(prefix + ".w3", w3);
    out.emplace_back(prefix + ".b3", b3);
    if (cfg.norm == NormKind::Instance) {
        out.emplace_back(prefix + ".g1", g1);
        out.emplace_back(prefix + ".be1", be1);
        out.emplace_back(prefix + ".g2", g2);
        out.emplace_back(prefix + ".be2", be2);
        out.emplace_back(prefix + ".g3", g3);
        out.emplace_back(prefix + ".be3", be3);
    }
}

d::Tensor mask_logits(const d::Tensor& logits, const std::vector<std::uint8_t>& acquired_flat) {
    if (static_cast<std::int64_t>(acquired_flat.size()) != logits.numel())
        d::op_error("mask_logits", "mask size " + std::to_string(acquired_flat.size()) +
                                       " does not match logits " + d::shape_str(logits.shape()));
    const int n = logits.shape()[0], a = logits.shape()[1];
    auto penalty = d::Tensor::zeros(logits.shape());
    for (int i = 0; i < n; ++i) {
        bool any_free = false;
        for (int j = 0; j < a; ++j) {
            if (acquired_flat[static_cast<size_t>(i) * a + j])
                penalty.values()[static_cast<size_t>(i) * a + j] = kMaskPenalty;
            else
                any_free = true;
        }
        if (!any_free)
            throw std::logic_error("mask_logits: row " + std::to_string(i) +
                                   " has no unacquired line");
    }
    return d::add(logits, penalty);
}

int sample_line(const float* probs, int n_pe, const std::uint8_t* acquired, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cum = 0;
    int last_valid = -1;
    for (int j = 0; j < n_pe; ++j) {
        if (acquired[j]) continue;
        last_valid = j;
        cum += probs[j];
        if (u <= cum) return j;
    }
    if (last_valid < 0) throw std::logic_error("sample_line: no unacquired line");
    return last_valid;  // u landed in the rounding tail
}

// ---------------------------------------------------------------------------

PolicyNet::PolicyNet(const EncoderConfig& cfg, std::mt19937_64& rng) : enc_(cfg, rng) {
    const int f = enc_.feature_dim();
    actor_w_ = d::Tensor::zeros({cfg.n_pe, f});
    d::kaiming_uniform(actor_w_, f, rng);
    actor_b_ = d::Tensor::zeros({cfg.n_pe});
    critic_w_ = d::Tensor::zeros({1, f});
    d::kaiming_uniform(critic_w_, f, rng);
    critic_b_ = d::Tensor::zeros({1});
    enc_.collect(params_);
    params_.push_back(actor_w_);
    params_.push_back(actor_b_);
    params_.push_back(critic_w_);
    params_.push_back(critic_b_);
}

PolicyNet::Output PolicyNet::forward(const d::Tensor& obs,
                                     const std::vector<std::uint8_t>& acquired_flat) const {
    auto feat = enc_.forward(obs);
    Output out;
    out.masked_logits = mask_logits(d::linear(feat, actor_w_, actor_b_), acquired_flat);
    out.value = d::linear(feat, critic_w_, critic_b_);
    return out;
}

PolicyNet::ActResult PolicyNet::act(const std::vector<float>& obs, const fourier::LineMask& mask,
                                    std::mt19937_64& rng) const {
    const auto& cfg = enc_.cfg;
    auto x = d::Tensor::from({1, 2, cfg.h, cfg.w}, std::vector<float>(obs.begin(), obs.end()));
    auto o = forward(x, mask.acquired);
    auto probs = d::softmax(o.masked_logits);
    ActResult r;
    r.probs = probs.values();
    r.action = sample_line(r.probs.data(), cfg.n_pe, mask.acquired.data(), rng);
    r.log_prob = std::log(std::max(r.probs[r.action], 1e-38f));
    r.value = o.value.values()[0];
    return r;
}

int PolicyNet::greedy_action(const std::vector<float>& obs, const fourier::LineMask& mask) const {
    const auto& cfg = enc_.cfg;
    auto x = d::Tensor::from({1, 2, cfg.h, cfg.w}, std::vector<float>(obs.begin(), obs.end()));
    auto o = forward(x, mask.acquired);
    const auto& logits = o.masked_logits.values();
    int best = -1;
    for (int j = 0; j < cfg.n_pe; ++j) {
        if (mask.is_acquired(j)) continue;
        if (best < 0 || logits[j] > logits[best]) best = j;
    }
    if (best < 0) throw std::logic_error("PolicyNet::greedy_action: no unacquired line");
    return best;
}

std::vector<std::pair<std::string, d::Tensor>> PolicyNet::named_parameters() const {
    std::vector<std::pair<std::string, d::Tensor>> out;
    enc_.collect_named("enc", out);
    out.emplace_back("actor.w", actor_w_);
    out.emplace_back("actor.b", actor_b_);
    out.emplace_back("critic.w", critic_w_);
    out.emplace_back("critic.b", critic_b_);
    return out;
}

// ---------------------------------------------------------------------------

QNet::QNet(const EncoderConfig& cfg, std::mt19937_64& rng) : enc_(cfg, rng) {
    const int f = enc_.feature_dim();
    head_w_ = d::Tensor::zeros({cfg.n_pe, f});
    d::kaiming_uniform(head_w_, f, rng);
    head_b_ = d::Tensor::zeros({cfg.n_pe});
    enc_.collect(params_);
    params_.push_back(head_w_);
    params_.push_back(head_b_);
    // target starts as an exact copy
    target_enc_ = enc_;
    auto clone = [](const d::Tensor& t) { return d::Tensor::from(t.shape(), t.values()); };
    target_enc_.w1 = clone(enc_.w1);
    target_enc_.b1 = clone(enc_.b1);
    target_enc_.w2 = clone(enc_.w2);
    target_enc_.b2 = clone(enc_.b2);
    target_enc_.w3 = clone(enc_.w3);
    target_enc_.b3 = clone(enc_.b3);
    if (cfg.norm == NormKind::Instance) {
        target_enc_.g1 = clone(enc_.g1);
        target_enc_.be1 = clone(enc_.be1);
        target_enc_.g2 = clone(enc_.g2);
        target_enc_.be2 = clone(enc_.be2);
        target_enc_.g3 = clone(enc_.g3);
        target_enc_.be3 = clone(enc_.be3);
    }
    target_head_w_ = clone(head_w_);
    target_head_b_ = clone(head_b_);
}

d::Tensor QNet::forward(const d::Tensor& obs, bool use_target) const {
    const Encoder& e = use_target ? target_enc_ : enc_;
    auto feat = e.forward(obs);
    return use_target ? d::linear(feat, target_head_w_, target_head_b_)
                      : d::linear(feat, head_w_, head_b_);
}

std::vector<float> QNet::values(const std::vector<float>& obs, bool use_target) const {
    const auto& cfg = enc_.cfg;
    auto x = d::Tensor::from({1, 2, cfg.h, cfg.w}, std::vector<float>(obs.begin(), obs.end()));
    return forward(x, use_target).values();
}

int QNet::greedy_action(const std::vector<float>& q, const fourier::LineMask& mask) {
    int best = -1;
    for (int j = 0; j < mask.size(); ++j) {
        if (mask.is_acquired(j)) continue;
        if (best < 0 || q[j] > q[best]) best = j;
    }
    if (best < 0) throw std::logic_error("QNet::greedy_action: no unacquired line");
    return best;
}

int QNet::epsilon_greedy(const std::vector<float>& obs, const fourier::LineMask& mask,
                         double epsilon, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
        std::vector<int> avail;
        for (int j = 0; j < mask.size(); ++j)
            if (!mask.is_acquired(j)) avail.push_back(j);
        if (avail.empty()) throw std::logic_error("QNet::epsilon_greedy: no unacquired line");
        std::uniform_int_distribution<size_t> pick(0, avail.size() - 1);
        return avail[pick(rng)];
    }
    return greedy_action(values(obs), mask);
}

void QNet::sync_target() {
    auto copy = [](const d::Tensor& src, d::Tensor& dst) { dst.values() = src.values(); };
    copy(enc_.w1, target_enc_.w1);
    copy(enc_.b1, target_enc_.b1);
    copy(enc_.w2, target_enc_.w2);
    copy(enc_.b2, target_enc_.b2);
    copy(enc_.w3, target_enc_.w3);
    copy(enc_.b3, target_enc_.b3);
    if (enc_.cfg.norm == NormKind::Instance) {
        copy(enc_.g1, target_enc_.g1);
        copy(enc_.be1, target_enc_.be1);
        copy(enc_.g2, target_enc_.g2);
        copy(enc_.be2, target_enc_.be2);
        copy(enc_.g3, target_enc_.g3);
        copy(enc_.be3, target_enc_.be3);
    }
    copy(head_w_, target_head_w_);
    copy(head_b_, target_head_b_);
}

std::vector<std::pair<std::string, d::Tensor>> QNet::named_parameters() const {
    std::vector<std::pair<std::string, d::Tensor>> out;
    enc_.collect_named("enc", out);
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

}  // namespace masc::policies

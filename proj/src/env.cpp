#include "masc/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace masc::env {

fourier::LineMask initial_mask(int n_pe, int initial_lines) {
    if (initial_lines < 0 || initial_lines > n_pe)
        throw std::invalid_argument("initial_mask: initial_lines out of range");
    std::vector<int> order(n_pe);
    std::iota(order.begin(), order.end(), 0);
    const int dc = n_pe / 2;
    std::stable_sort(order.begin(), order.end(), [dc](int a, int b) {
        const int da = std::abs(a - dc), db = std::abs(b - dc);
        return da != db ? da < db : a < b;
    });
    fourier::LineMask m(n_pe);
    for (int i = 0; i < initial_lines; ++i) m.set(order[i]);
    return m;
}

const AcquisitionState& AcquisitionEnv::reset(const metalsim::PairedSample& sample,
                                              const marnet::MarNet* mar) {
    sample_ = &sample;
    mar_ = mar;
    h_ = sample.h();
    w_ = sample.w();
    if (cfg_.initial_lines + cfg_.budget > w_)
        throw std::invalid_argument("AcquisitionEnv: initial_lines + budget = " +
                                    std::to_string(cfg_.initial_lines + cfg_.budget) +
                                    " exceeds " + std::to_string(w_) + " phase-encode lines");
    k_ = cfg_.data_mode == DataMode::Metal ? &sample.metal_k : &sample.clean_k;

    float peak = 0;
    for (float v : sample.clean_image) peak = std::max(peak, v);
    if (peak <= 0)
        throw std::invalid_argument("AcquisitionEnv: clean reference is identically zero");
    norm_scale_ = 1.0f / peak;
    ref_norm_.resize(sample.clean_image.size());
    for (size_t i = 0; i < ref_norm_.size(); ++i) ref_norm_[i] = sample.clean_image[i] * norm_scale_;

    state_.mask = initial_mask(w_, cfg_.initial_lines);
    state_.steps_taken = 0;
    state_.budget_remaining = cfg_.budget;
    state_.recon = fourier::reconstruct(*k_, state_.mask);
    active_ = true;
    evaluate_current();
    return state_;
}

void AcquisitionEnv::evaluate_current() {
    recon_norm_.resize(state_.recon.size());
    for (size_t i = 0; i < recon_norm_.size(); ++i) recon_norm_[i] = state_.recon[i] * norm_scale_;
    if (cfg_.reward_mode == RewardMode::MarProcessed && mar_ != nullptr)
        processed_norm_ = mar_->apply(recon_norm_, h_, w_);
    else
        processed_norm_ = recon_norm_;
    q_current_ = metrics::quality(processed_norm_, ref_norm_, h_, w_, cfg_.quality);
}

void AcquisitionEnv::refresh_processed() {
    if (!active_) return;
    evaluate_current();
}

AcquisitionEnv::StepResult AcquisitionEnv::step(int action) {
    if (!active_) throw std::logic_error("AcquisitionEnv::step: no active episode; call reset");
    if (state_.budget_remaining <= 0)
        throw std::logic_error("AcquisitionEnv::step: acquisition budget exhausted");
    if (action < 0 || action >= w_)
        throw std::invalid_argument("AcquisitionEnv::step: line " + std::to_string(action) +
                                    " outside [0," + std::to_string(w_) + ")");
    if (state_.mask.is_acquired(action))
        throw std::invalid_argument("AcquisitionEnv::step: line " + std::to_string(action) +
                                    " already acquired");
    state_.mask.set(action);
    state_.recon = fourier::reconstruct(*k_, state_.mask);
    state_.steps_taken += 1;
    state_.budget_remaining -= 1;
    const double q_prev = q_current_;
    evaluate_current();
    StepResult r;
    r.reward = cfg_.alpha * static_cast<float>(q_current_ - q_prev);
    r.done = state_.budget_remaining == 0;
    if (r.done) active_ = false;
    return r;
}

std::vector<float> AcquisitionEnv::observation() const {
    std::vector<float> obs(2 * static_cast<size_t>(h_) * w_);
    std::copy(processed_norm_.begin(), processed_norm_.end(), obs.begin());
    float* mask_plane = obs.data() + static_cast<size_t>(h_) * w_;
    for (int i = 0; i < h_; ++i)
        for (int j = 0; j < w_; ++j)
            mask_plane[static_cast<size_t>(i) * w_ + j] = state_.mask.is_acquired(j) ? 1.0f : 0.0f;
    return obs;
}

}  // namespace masc::env

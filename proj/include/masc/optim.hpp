#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "masc/tensor.hpp"

namespace masc::diff {

// Adam with bias correction; moment buffers are parallel to the parameter
// list handed to init().
template <typename S>
struct AdamState {
    S lr = S(3e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    long step_count = 0;
    std::vector<std::vector<S>> m, v;

    void init(const std::vector<TensorT<S>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.values().size(), S(0));
            v.emplace_back(p.values().size(), S(0));
        }
    }
};

template <typename S>
void adam_step(std::vector<TensorT<S>>& params, AdamState<S>& st) {
    if (st.m.size() != params.size())
        throw std::invalid_argument("adam_step: state not initialized for this parameter list");
    st.step_count += 1;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(st.beta1), st.step_count));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(st.beta2), st.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.has_grad()) p.zero_grad();
        const auto& g = p.grad();
        auto& m = st.m[i];
        auto& v = st.v[i];
        if (m.size() != g.size())
            throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                        " changed size since init");
        S* pv = p.data();
        for (size_t j = 0; j < g.size(); ++j) {
            m[j] = st.beta1 * m[j] + (S(1) - st.beta1) * g[j];
            v[j] = st.beta2 * v[j] + (S(1) - st.beta2) * g[j] * g[j];
            const S mhat = m[j] / bc1;
            const S vhat = v[j] / bc2;
            pv[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

// Scales all gradients so the global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
template <typename S>
S clip_grad_norm(std::vector<TensorT<S>>& params, S max_norm) {
    double total = 0;
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        for (S g : p.grad()) total += static_cast<double>(g) * g;
    }
    const S norm = static_cast<S>(std::sqrt(total));
    if (norm > max_norm && norm > S(0)) {
        const S scale = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (auto& g : p.grad()) g *= scale;
        }
    }
    return norm;
}

// Kaiming-uniform fan-in initialization (ReLU gain): U(-b, b), b = sqrt(6/fan_in).
template <typename S, typename Rng>
void kaiming_uniform(TensorT<S>& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.values()) v = static_cast<S>(dist(rng));
}

}  // namespace masc::diff

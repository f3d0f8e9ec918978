#pragma once

// Conventional line-selection baselines plus the PPO actor-critic and
// DQN/DDQN value networks, all with hard action masking over acquired lines.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "masc/fourier.hpp"
#include "masc/marnet.hpp"  // NormKind
#include "masc/ops.hpp"

namespace masc::policies {

using marnet::NormKind;

enum class BaselineKind { CenterOut, Random, RandomLowBias, Equispaced };

BaselineKind baseline_from_name(const std::string& name);
std::string baseline_name(BaselineKind k);

// Next line under the given baseline rule. total_lines parameterizes the
// equispaced pattern (the episode's initial + budget count).
int baseline_next_line(BaselineKind kind, const fourier::LineMask& mask, std::mt19937_64& rng,
                       int total_lines);

// Fixed equidistant order: round(j * N_pe / total_lines) for j = 0..total-1.
std::vector<int> equispaced_order(int n_pe, int total_lines);

struct EncoderConfig {
    int h = 64;
    int w = 64;
    int n_pe = 64;
    int c1 = 16, c2 = 32, c3 = 64;
    NormKind norm = NormKind::Instance;
};

// Shared conv encoder: three conv+norm+ReLU+pool blocks over the 2-channel
// observation stack.
struct Encoder {
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::mt19937_64& rng);

    diff::Tensor forward(const diff::Tensor& obs) const;  // [N,2,H,W] -> [N,F]
    int feature_dim() const;
    void collect(std::vector<diff::Tensor>& params) const;
    void collect_named(const std::string& prefix,
                       std::vector<std::pair<std::string, diff::Tensor>>& out) const;

    EncoderConfig cfg;
    diff::Tensor w1, b1, g1, be1;
    diff::Tensor w2, b2, g2, be2;
    diff::Tensor w3, b3, g3, be3;
};

constexpr float kMaskPenalty = -1e30f;

// Logits with acquired actions pushed to -inf-equivalent; acquired_flat is
// row-major [N * n_pe], nonzero = acquired.
diff::Tensor mask_logits(const diff::Tensor& logits, const std::vector<std::uint8_t>& acquired_flat);

// Inverse-CDF draw over a probability row; acquired entries carry exactly
// zero mass. Throws if no line is available.
int sample_line(const float* probs, int n_pe, const std::uint8_t* acquired, std::mt19937_64& rng);

class PolicyNet {
public:
    PolicyNet(const EncoderConfig& cfg, std::mt19937_64& rng);

    struct Output {
        diff::Tensor masked_logits;  // [N, n_pe]
        diff::Tensor value;          // [N, 1]
    };
    // obs [N,2,H,W]; acquired_flat [N*n_pe].
    Output forward(const diff::Tensor& obs, const std::vector<std::uint8_t>& acquired_flat) const;

    // Convenience single-observation act: returns (action, log-prob, value).
    struct ActResult {
        int action = -1;
        float log_prob = 0;
        float value = 0;
        std::vector<float> probs;
    };
    ActResult act(const std::vector<float>& obs, const fourier::LineMask& mask,
                  std::mt19937_64& rng) const;
    int greedy_action(const std::vector<float>& obs, const fourier::LineMask& mask) const;

    std::vector<diff::Tensor>& parameters() { return params_; }
    std::vector<std::pair<std::string, diff::Tensor>> named_parameters() const;
    const EncoderConfig& config() const { return enc_.cfg; }

private:
    Encoder enc_;
    diff::Tensor actor_w_, actor_b_;
    diff::Tensor critic_w_, critic_b_;
    std::vector<diff::Tensor> params_;
};

class QNet {
public:
    QNet(const EncoderConfig& cfg, std::mt19937_64& rng);

    // Action values for a batch; online or target parameters.
    diff::Tensor forward(const diff::Tensor& obs, bool use_target = false) const;
    std::vector<float> values(const std::vector<float>& obs, bool use_target = false) const;

    // Argmax over unacquired lines, ties toward the lower index.
    static int greedy_action(const std::vector<float>& q, const fourier::LineMask& mask);
    int epsilon_greedy(const std::vector<float>& obs, const fourier::LineMask& mask, double epsilon,
                       std::mt19937_64& rng) const;

    void sync_target();  // target <- online, bitwise

    std::vector<diff::Tensor>& parameters() { return params_; }
    std::vector<std::pair<std::string, diff::Tensor>> named_parameters() const;
    const EncoderConfig& config() const { return enc_.cfg; }

private:
    Encoder enc_, target_enc_;
    diff::Tensor head_w_, head_b_, target_head_w_, target_head_b_;
    std::vector<diff::Tensor> params_;
};

}  // namespace masc::policies

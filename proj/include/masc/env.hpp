#pragma once

// The line-acquisition MDP over one paired sample: sequential phase-encode
// selection, zero-filled reconstruction, and quality-delta rewards, either on
// raw reconstructions or on MAR-processed ones.

#include <optional>
#include <vector>

#include "masc/fourier.hpp"
#include "masc/marnet.hpp"
#include "masc/metalsim.hpp"
#include "masc/metrics.hpp"

namespace masc::env {

enum class RewardMode { Raw, MarProcessed };
enum class DataMode { Metal, Clean };  // which k-space drives the episode

struct EnvConfig {
    int initial_lines = 1;
    int budget = 5;
    float alpha = 100.0f;
    RewardMode reward_mode = RewardMode::Raw;
    DataMode data_mode = DataMode::Metal;
    metrics::QualityConfig quality;
};

struct AcquisitionState {
    std::vector<float> recon;  // I_t = |F^-1(K .* M_t)|, unnormalized
    fourier::LineMask mask;
    int steps_taken = 0;
    int budget_remaining = 0;
};

// The initial_lines columns nearest DC, ties toward the lower index.
fourier::LineMask initial_mask(int n_pe, int initial_lines);

class AcquisitionEnv {
public:
    explicit AcquisitionEnv(const EnvConfig& cfg) : cfg_(cfg) {}

    // Binds the episode to a sample; mar may be null (raw observations and
    // rewards regardless of mode).
    const AcquisitionState& reset(const metalsim::PairedSample& sample,
                                  const marnet::MarNet* mar = nullptr);

    struct StepResult {
        float reward = 0;
        bool done = false;
    };
    StepResult step(int action);

    // 2-channel feature stack [2*H*W]: processed (or raw) normalized
    // reconstruction, then the mask broadcast along the readout axis.
    std::vector<float> observation() const;

    // Re-evaluates cached MAR outputs after in-place MAR parameter updates.
    void refresh_processed();

    const AcquisitionState& state() const { return state_; }
    bool episode_active() const { return active_; }
    int h() const { return h_; }
    int w() const { return w_; }
    int n_pe() const { return w_; }
    const EnvConfig& config() const { return cfg_; }

    // Per-sample normalized images (divided by max of the clean reference).
    const std::vector<float>& reference_normalized() const { return ref_norm_; }
    const std::vector<float>& recon_normalized() const { return recon_norm_; }
    const std::vector<float>& processed_normalized() const { return processed_norm_; }
    double current_quality() const { return q_current_; }

private:
    void evaluate_current();

    EnvConfig cfg_;
    const metalsim::PairedSample* sample_ = nullptr;
    const marnet::MarNet* mar_ = nullptr;
    const fourier::KSpaceGrid* k_ = nullptr;
    AcquisitionState state_;
    std::vector<float> ref_norm_, recon_norm_, processed_norm_;
    float norm_scale_ = 1.0f;
    double q_current_ = 0.0;
    int h_ = 0, w_ = 0;
    bool active_ = false;
};

}  // namespace masc::env

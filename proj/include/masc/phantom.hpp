#pragma once

// Synthetic multi-tissue 2D phantoms: randomized ellipse composites carrying
// PD/T1/T2/susceptibility maps, plus the analytic spin-echo signal.

#include <cstdint>
#include <string>
#include <vector>

namespace masc::phantom {

struct Tissue {
    std::uint8_t label = 0;
    std::string name;
    float pd = 0;       // unitless, [0,1]
    float t1_ms = 1;    // > 0
    float t2_ms = 1;    // > 0, <= t1
    float chi_ppm = 0;  // magnetic susceptibility
};

struct TissueMaps {
    int h = 0;
    int w = 0;
    std::vector<float> pd, t1_ms, t2_ms;
    std::vector<std::uint8_t> label;
    std::vector<Tissue> table;

    const Tissue& tissue_of(std::uint8_t lbl) const;
};

struct SequenceParams {
    float tr_ms = 4050.0f;
    float te_ms = 32.0f;
    float readout_bw_hz_per_px = 710.0f;
    float rf_bw_hz = 1000.0f;
    std::string field_strength = "3T";
};

struct GeometryConfig {
    int h = 64;
    int w = 64;
    int min_shapes = 3;
    int max_shapes = 6;
    std::vector<Tissue> table;  // empty -> default_tissue_table()
};

// Air + five tissues with literature-style constants; values are config,
// not claims.
std::vector<Tissue> default_tissue_table();

// Deterministic per seed: one body ellipse with randomized interior
// ellipses; later shapes overwrite earlier ones.
TissueMaps generate_phantom(std::uint64_t seed, const GeometryConfig& cfg);

// S = PD * (1 - exp(-TR/T1)) * exp(-TE/T2), pixelwise; air stays exactly 0.
std::vector<float> spin_echo_signal(const TissueMaps& maps, const SequenceParams& seq);

}  // namespace masc::phantom

#pragma once

// Metal-implant artifact synthesis: susceptibility dipole field, RF-profile
// signal void, readout-direction displacement with mass-conserving forward
// splatting, and off-resonance phase accrual. Produces exactly matched
// clean/metal k-space pairs.

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "masc/fourier.hpp"
#include "masc/phantom.hpp"

namespace masc::metalsim {

enum class ImplantShape { Disc, Capsule };

struct ImplantSpec {
    ImplantShape shape = ImplantShape::Capsule;
    double radius_px = 4.0;
    double half_length_px = 8.0;  // capsule axis half-length; 0 -> disc
    double center_row = 0.0;
    double center_col = 0.0;
    double rotation_deg = 0.0;
    double delta_chi_ppm = 900.0;  // CoCr
    double peak_df_hz = 4000.0;    // field-scale calibration
};

struct FieldMap {
    int h = 0;
    int w = 0;
    std::vector<float> df_hz;
};

struct PairedSample {
    fourier::KSpaceGrid clean_k;   // DC-centered
    fourier::KSpaceGrid metal_k;   // DC-centered
    std::vector<std::uint8_t> implant_mask;
    std::vector<float> clean_image;  // I*
    std::vector<float> metal_image;  // |F^-1(metal_k)| at full sampling
    std::uint32_t subject = 0;

    int h() const { return clean_k.h; }
    int w() const { return clean_k.w; }
};

struct ArtifactConfig {
    double rf_fwhm_hz = 2250.0;
    double rotation_range_deg = 45.0;  // placement draw: uniform +/- range
    double translation_box_px = 0.0;   // 0 -> W/4
    double noise_std = 0.0;            // additive complex Gaussian, 0 = off
};

// Implant disc/capsule rasterized on the grid; true inside.
std::vector<std::uint8_t> rasterize_implant(const ImplantSpec& spec, int h, int w);

// Unscaled 2D dipole convolution of a susceptibility map (ppm in, arbitrary
// units out): IFFT( FFT(chi) * D(k) ), D = 1/3 - ky^2/|k|^2, D(0) = 0.
std::vector<float> dipole_field_raw(const std::vector<float>& chi_ppm, int h, int w);

// Tissue-background + implant susceptibility, dipole-convolved and rescaled
// so max|df| equals spec.peak_df_hz.
FieldMap dipole_field(const ImplantSpec& spec, const std::vector<std::uint8_t>& implant_mask,
                      const phantom::TissueMaps& maps);

// Void -> RF attenuation -> readout splatting -> phase accrual; returns the
// complex corrupted image whose FFT is the metal k-space.
std::vector<std::complex<float>> apply_metal_artifacts(const std::vector<float>& clean_image,
                                                       const FieldMap& field,
                                                       const std::vector<std::uint8_t>& implant_mask,
                                                       const phantom::SequenceParams& seq,
                                                       const ArtifactConfig& cfg);

// Mass-conserving linear forward splat along the readout (row) axis;
// displacement is df/bw pixels, boundary contributions clamp to the edges.
std::vector<float> splat_readout(const std::vector<float>& img, const FieldMap& field, int h, int w,
                                 double readout_bw_hz_per_px);

struct PlacementInfo {
    double rotation_deg = 0;
    double d_row = 0;
    double d_col = 0;
    int tries = 0;
};

// One placement draw: rotation uniform in +/- rotation_range_deg, translation
// uniform in the configured box around the grid center; re-drawn (up to 100
// times) until the implant lies inside the grid.
ImplantSpec sample_placement(std::mt19937_64& rng, const ImplantSpec& base,
                             const ArtifactConfig& cfg, int h, int w, PlacementInfo* info = nullptr);

// Full paired-sample synthesis with randomized implant placement drawn from
// the seeded stream; placement re-sampled (up to 100 tries) until the
// implant lies inside the grid.
PairedSample make_paired_sample(std::uint64_t seed, const phantom::GeometryConfig& phantom_cfg,
                                const ImplantSpec& implant_cfg, const phantom::SequenceParams& seq,
                                const ArtifactConfig& art_cfg, PlacementInfo* info = nullptr);

}  // namespace masc::metalsim

#include "masc/metalsim.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "masc/rng.hpp"

namespace masc::metalsim {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;  // sqrt(8 ln 2)

bool implant_inside(const ImplantSpec& spec, int h, int w) {
    // Conservative bound: rotated capsule fits in a disc of radius
    // half_length + radius around the center.
    const double len = spec.shape == ImplantShape::Capsule ? spec.half_length_px : 0.0;
    const double reach = len + spec.radius_px;
    return spec.center_row - reach >= 0 && spec.center_row + reach < h &&
           spec.center_col - reach >= 0 && spec.center_col + reach < w;
}

}  // namespace

std::vector<std::uint8_t> rasterize_implant(const ImplantSpec& spec, int h, int w) {
    std::vector<std::uint8_t> mask(static_cast<size_t>(h) * w, 0);
    const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
    const double ax = std::cos(theta), ay = std::sin(theta);
    const double len = spec.shape == ImplantShape::Capsule ? spec.half_length_px : 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double dy = i - spec.center_row, dx = j - spec.center_col;
            // distance to the segment of half-length len along (ax, ay)
            const double t = std::clamp(dx * ax + dy * ay, -len, len);
            const double px = dx - t * ax, py = dy - t * ay;
            if (px * px + py * py <= spec.radius_px * spec.radius_px)
                mask[static_cast<size_t>(i) * w + j] = 1;
        }
    return mask;
}

std::vector<float> dipole_field_raw(const std::vector<float>& chi_ppm, int h, int w) {
    if (static_cast<size_t>(h) * w != chi_ppm.size())
        throw std::invalid_argument("dipole_field_raw: map size does not match extents");
    fourier::KSpaceGrid g;
    g.h = h;
    g.w = w;
    g.samples.resize(chi_ppm.size());
    for (size_t i = 0; i < chi_ppm.size(); ++i) g.samples[i] = {chi_ppm[i], 0.0f};
    auto spec = fourier::fft2(g);
    // DC-at-origin frequency indexing: signed frequency f = i < n/2 ? i : i - n.
    for (int r = 0; r < h; ++r) {
        const double ky = r < h / 2 ? r : r - h;
        for (int c = 0; c < w; ++c) {
            const double kx = c < w / 2 ? c : c - w;
            const double k2 = ky * ky + kx * kx;
            const double d = k2 == 0.0 ? 0.0 : 1.0 / 3.0 - (ky * ky) / k2;
            spec.at(r, c) *= static_cast<float>(d);
        }
    }
    auto img = fourier::ifft2(spec);
    std::vector<float> out(chi_ppm.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = img.samples[i].real();
    return out;
}

FieldMap dipole_field(const ImplantSpec& spec, const std::vector<std::uint8_t>& implant_mask,
                      const phantom::TissueMaps& maps) {
    const int h = maps.h, w = maps.w;
    if (implant_mask.size() != maps.pd.size())
        throw std::invalid_argument("dipole_field: mask size does not match maps");
    std::vector<float> chi(implant_mask.size());
    for (size_t i = 0; i < chi.size(); ++i) {
        chi[i] = maps.tissue_of(maps.label[i]).chi_ppm;
        if (implant_mask[i]) chi[i] += static_cast<float>(spec.delta_chi_ppm);
    }
    FieldMap f;
    f.h = h;
    f.w = w;
    f.df_hz = dipole_field_raw(chi, h, w);
    float peak = 0;
    for (float v : f.df_hz) peak = std::max(peak, std::fabs(v));
    if (peak > 0) {
        const float scale = static_cast<float>(spec.peak_df_hz) / peak;
        for (auto& v : f.df_hz) v *= scale;
    }
    return f;
}

std::vector<float> splat_readout(const std::vector<float>& img, const FieldMap& field, int h, int w,
                                 double readout_bw_hz_per_px) {
    if (img.size() != field.df_hz.size() || static_cast<size_t>(h) * w != img.size())
        throw std::invalid_argument("splat_readout: size mismatch");
    std::vector<float> out(img.size(), 0.0f);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const size_t idx = static_cast<size_t>(i) * w + j;
            const double target = i + field.df_hz[idx] / readout_bw_hz_per_px;
            const double f = std::floor(target);
            const double w1 = target - f;
            const int r0 = std::clamp(static_cast<int>(f), 0, h - 1);
            const int r1 = std::clamp(static_cast<int>(f) + 1, 0, h - 1);
            out[static_cast<size_t>(r0) * w + j] += static_cast<float>((1.0 - w1) * img[idx]);
            out[static_cast<size_t>(r1) * w + j] += static_cast<float>(w1 * img[idx]);
        }
    return out;
}

std::vector<std::complex<float>> apply_metal_artifacts(const std::vector<float>& clean_image,
                                                       const FieldMap& field,
                                                       const std::vector<std::uint8_t>& implant_mask,
                                                       const phantom::SequenceParams& seq,
                                                       const ArtifactConfig& cfg) {
    const int h = field.h, w = field.w;
    if (clean_image.size() != field.df_hz.size() || implant_mask.size() != clean_image.size())
        throw std::invalid_argument("apply_metal_artifacts: size mismatch");
    std::vector<float> s = clean_image;
    // (1) no signal from metal
    for (size_t i = 0; i < s.size(); ++i)
        if (implant_mask[i]) s[i] = 0.0f;
    // (2) RF excitation profile
    const double sigma = cfg.rf_fwhm_hz / kFwhmToSigma;
    for (size_t i = 0; i < s.size(); ++i) {
        const double df = field.df_hz[i];
        s[i] = static_cast<float>(s[i] * std::exp(-df * df / (2.0 * sigma * sigma)));
    }
    // (3) readout displacement; pile-up and voids fall out of mass transport
    s = splat_readout(s, field, h, w, seq.readout_bw_hz_per_px);
    // (4) off-resonance phase at TE
    std::vector<std::complex<float>> z(s.size());
    const double te_s = seq.te_ms * 1e-3;
    for (size_t i = 0; i < z.size(); ++i) {
        const double phase = 2.0 * std::numbers::pi * field.df_hz[i] * te_s;
        z[i] = std::complex<float>(static_cast<float>(s[i] * std::cos(phase)),
                                   static_cast<float>(s[i] * std::sin(phase)));
    }
    return z;
}

ImplantSpec sample_placement(std::mt19937_64& rng, const ImplantSpec& base,
                             const ArtifactConfig& cfg, int h, int w, PlacementInfo* info) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double box = cfg.translation_box_px > 0 ? cfg.translation_box_px : w / 4.0;
    ImplantSpec placed = base;
    PlacementInfo pi;
    for (pi.tries = 1; pi.tries <= 100; ++pi.tries) {
        pi.rotation_deg = (2.0 * unit(rng) - 1.0) * cfg.rotation_range_deg;
        pi.d_row = (2.0 * unit(rng) - 1.0) * box;
        pi.d_col = (2.0 * unit(rng) - 1.0) * box;
        placed.rotation_deg = pi.rotation_deg;
        placed.center_row = h / 2.0 + pi.d_row;
        placed.center_col = w / 2.0 + pi.d_col;
        if (implant_inside(placed, h, w)) {
            if (info) *info = pi;
            return placed;
        }
    }
    throw std::runtime_error("sample_placement: no valid implant placement in 100 tries");
}

PairedSample make_paired_sample(std::uint64_t seed, const phantom::GeometryConfig& phantom_cfg,
                                const ImplantSpec& implant_cfg, const phantom::SequenceParams& seq,
                                const ArtifactConfig& art_cfg, PlacementInfo* info) {
    const int h = phantom_cfg.h, w = phantom_cfg.w;
    auto maps = phantom::generate_phantom(seed, phantom_cfg);
    auto clean = phantom::spin_echo_signal(maps, seq);

    auto rng = rng::stream(seed, "implant-placement");
    ImplantSpec placed = sample_placement(rng, implant_cfg, art_cfg, h, w, info);

    PairedSample s;
    s.implant_mask = rasterize_implant(placed, h, w);
    s.clean_image = clean;
    s.clean_k = fourier::fftshift(fourier::fft2(h, w, clean));

    const auto field = dipole_field(placed, s.implant_mask, maps);
    auto corrupted = apply_metal_artifacts(clean, field, s.implant_mask, seq, art_cfg);
    if (art_cfg.noise_std > 0) {
        auto nrng = rng::stream(seed, "kspace-noise");
        std::normal_distribution<double> noise(0.0, art_cfg.noise_std);
        for (auto& v : corrupted)
            v += std::complex<float>(static_cast<float>(noise(nrng)),
                                     static_cast<float>(noise(nrng)));
    }
    fourier::KSpaceGrid cg;
    cg.h = h;
    cg.w = w;
    cg.samples = std::move(corrupted);
    s.metal_k = fourier::fftshift(fourier::fft2(cg));
    s.metal_image = fourier::reconstruct(s.metal_k, fourier::LineMask::full(w));
    return s;
}

}  // namespace masc::metalsim

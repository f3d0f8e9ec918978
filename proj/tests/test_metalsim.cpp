#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "masc/metalsim.hpp"
#include "masc/metrics.hpp"

namespace ms = masc::metalsim;
namespace ph = masc::phantom;

namespace {

ms::ImplantSpec centered_disc(int h, int w, double radius = 4.0) {
    ms::ImplantSpec s;
    s.shape = ms::ImplantShape::Disc;
    s.radius_px = radius;
    s.half_length_px = 0.0;
    s.center_row = h / 2.0;
    s.center_col = w / 2.0;
    return s;
}

std::vector<float> random_image(int h, int w, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> img(static_cast<size_t>(h) * w);
    for (auto& v : img) v = dist(rng);
    return img;
}

}  // namespace

TEST_CASE("zero susceptibility gives a zero field") {
    const int n = 32;
    std::vector<float> chi(n * n, 0.0f);
    auto df = ms::dipole_field_raw(chi, n, n);
    for (float v : df) CHECK(v == 0.0f);
}

TEST_CASE("raw dipole field is linear in susceptibility") {
    const int n = 32;
    auto spec = centered_disc(n, n);
    auto mask = ms::rasterize_implant(spec, n, n);
    std::vector<float> chi1(mask.size(), 0.0f), chi2(mask.size(), 0.0f);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            chi1[i] = 450.0f;
            chi2[i] = 900.0f;
        }
    auto f1 = ms::dipole_field_raw(chi1, n, n);
    auto f2 = ms::dipole_field_raw(chi2, n, n);
    for (size_t i = 0; i < f1.size(); ++i)
        CHECK(f2[i] == doctest::Approx(2.0f * f1[i]).epsilon(1e-4).scale(1e-3));
}

TEST_CASE("field flips sign between axial and transverse lobes") {
    const int n = 64;
    auto spec = centered_disc(n, n, 5.0);
    auto mask = ms::rasterize_implant(spec, n, n);
    ph::GeometryConfig gcfg;
    gcfg.h = gcfg.w = n;
    auto maps = ph::generate_phantom(3, gcfg);
    auto field = ms::dipole_field(spec, mask, maps);
    const int c = n / 2, off = 8;
    const float axial = field.df_hz[(c + off) * n + c];      // along readout rows
    const float transverse = field.df_hz[c * n + (c + off)];  // along columns
    CHECK(axial * transverse < 0.0f);
    // peak calibration
    float peak = 0;
    for (float v : field.df_hz) peak = std::max(peak, std::fabs(v));
    CHECK(peak == doctest::Approx(spec.peak_df_hz).epsilon(1e-4));
}

TEST_CASE("splatting conserves total intensity") {
    const int n = 64;
    auto img = random_image(n, n, 5);
    ms::FieldMap field;
    field.h = field.w = n;
    field.df_hz.resize(img.size());
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> dist(-4000.0f, 4000.0f);
    for (auto& v : field.df_hz) v = dist(rng);
    auto out = ms::splat_readout(img, field, n, n, 710.0);
    double before = 0, after = 0;
    for (float v : img) before += v;
    for (float v : out) after += v;
    CHECK(std::fabs(after - before) / before < 1e-4);
}

TEST_CASE("zero field and empty mask leave the image exactly unchanged") {
    const int n = 32;
    auto img = random_image(n, n, 7);
    ms::FieldMap field;
    field.h = field.w = n;
    field.df_hz.assign(img.size(), 0.0f);
    std::vector<std::uint8_t> empty_mask(img.size(), 0);
    ph::SequenceParams seq;
    ms::ArtifactConfig cfg;
    auto z = ms::apply_metal_artifacts(img, field, empty_mask, seq, cfg);
    for (size_t i = 0; i < img.size(); ++i) {
        CHECK(z[i].real() == img[i]);
        CHECK(z[i].imag() == 0.0f);
    }
}

TEST_CASE("|df| = FWHM/2 attenuates by exactly one half before displacement") {
    const int n = 16;
    std::vector<float> img(n * n, 1.0f);
    ms::FieldMap field;
    field.h = field.w = n;
    field.df_hz.assign(img.size(), 0.0f);
    const size_t probe = 5 * n + 7;
    ms::ArtifactConfig cfg;
    field.df_hz[probe] = static_cast<float>(cfg.rf_fwhm_hz / 2.0);
    ph::SequenceParams seq;
    seq.readout_bw_hz_per_px = 1e30f;  // suppress displacement
    std::vector<std::uint8_t> empty_mask(img.size(), 0);
    auto z = ms::apply_metal_artifacts(img, field, empty_mask, seq, cfg);
    CHECK(std::abs(z[probe]) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("voided interior carries no signal before displacement") {
    const int n = 32;
    std::vector<float> img(n * n, 0.8f);
    auto spec = centered_disc(n, n);
    auto mask = ms::rasterize_implant(spec, n, n);
    ms::FieldMap field;
    field.h = field.w = n;
    field.df_hz.assign(img.size(), 0.0f);
    ph::SequenceParams seq;
    ms::ArtifactConfig cfg;
    auto z = ms::apply_metal_artifacts(img, field, mask, seq, cfg);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) CHECK(std::abs(z[i]) == 0.0f);
}

TEST_CASE("paired samples are bit-identical under the same seed") {
    ph::GeometryConfig gcfg;
    ms::ImplantSpec icfg;
    ph::SequenceParams seq;
    ms::ArtifactConfig acfg;
    auto a = ms::make_paired_sample(42, gcfg, icfg, seq, acfg);
    auto b = ms::make_paired_sample(42, gcfg, icfg, seq, acfg);
    CHECK(a.clean_k.samples == b.clean_k.samples);
    CHECK(a.metal_k.samples == b.metal_k.samples);
    CHECK(a.implant_mask == b.implant_mask);
    CHECK(a.clean_image == b.clean_image);
    auto c = ms::make_paired_sample(43, gcfg, icfg, seq, acfg);
    CHECK(a.metal_k.samples != c.metal_k.samples);
}

TEST_CASE("clean k-space reconstructs the reference image") {
    ph::GeometryConfig gcfg;
    ms::ImplantSpec icfg;
    ph::SequenceParams seq;
    ms::ArtifactConfig acfg;
    auto s = ms::make_paired_sample(7, gcfg, icfg, seq, acfg);
    auto rec = masc::fourier::reconstruct(s.clean_k, masc::fourier::LineMask::full(s.w()));
    for (size_t i = 0; i < rec.size(); ++i)
        CHECK(std::fabs(rec[i] - s.clean_image[i]) < 1e-5);
}

TEST_CASE("small fields corrupt only a neighborhood of the implant") {
    ph::GeometryConfig gcfg;
    ms::ImplantSpec icfg;
    icfg.peak_df_hz = 200.0;
    ph::SequenceParams seq;
    ms::ArtifactConfig acfg;
    ms::PlacementInfo info;
    auto s = ms::make_paired_sample(11, gcfg, icfg, seq, acfg, &info);
    const int h = s.h(), w = s.w();
    const double cy = h / 2.0 + info.d_row, cx = w / 2.0 + info.d_col;
    const double reach = icfg.half_length_px + icfg.radius_px;
    double far_linf = 0, near_linf = 0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double dist = std::hypot(i - cy, j - cx);
            const double diff =
                std::fabs(s.metal_image[i * w + j] - s.clean_image[i * w + j]);
            if (dist > 3.0 * reach)
                far_linf = std::max(far_linf, diff);
            else
                near_linf = std::max(near_linf, diff);
        }
    CHECK(near_linf > 0.05);     // the void is visible
    CHECK(far_linf < 0.02);      // far field essentially untouched
}

TEST_CASE("placement draws respect the configured bounds") {
    ms::ImplantSpec base;
    ms::ArtifactConfig cfg;
    std::mt19937_64 rng(123);
    const int n = 64;
    const double box = n / 4.0;
    for (int i = 0; i < 10000; ++i) {
        ms::PlacementInfo info;
        auto placed = ms::sample_placement(rng, base, cfg, n, n, &info);
        CHECK(std::fabs(info.rotation_deg) <= 45.0);
        CHECK(std::fabs(info.d_row) <= box);
        CHECK(std::fabs(info.d_col) <= box);
        const double reach = placed.half_length_px + placed.radius_px;
        CHECK(placed.center_row - reach >= 0);
        CHECK(placed.center_row + reach < n);
    }
}

TEST_CASE("artifact severity is monotone in the field peak") {
    ph::GeometryConfig gcfg;
    ph::SequenceParams seq;
    ms::ArtifactConfig acfg;
    double last = -1.0;
    for (double peak : {250.0, 500.0, 1000.0, 2000.0, 4000.0}) {
        ms::ImplantSpec icfg;
        icfg.peak_df_hz = peak;
        auto s = ms::make_paired_sample(21, gcfg, icfg, seq, acfg);
        const double err = masc::metrics::nmse(s.metal_image, s.clean_image);
        CHECK(err >= last);
        last = err;
    }
}

TEST_CASE("implant that cannot fit raises after 100 tries") {
    ms::ImplantSpec huge;
    huge.radius_px = 100.0;
    ms::ArtifactConfig cfg;
    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(ms::sample_placement(rng, huge, cfg, 64, 64, nullptr), std::runtime_error);
}

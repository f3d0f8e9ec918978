#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "masc/fourier.hpp"

namespace f = masc::fourier;

namespace {

f::KSpaceGrid random_grid(int h, int w, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    f::KSpaceGrid g;
    g.h = h;
    g.w = w;
    g.samples.resize(static_cast<size_t>(h) * w);
    for (auto& v : g.samples) v = {dist(rng), dist(rng)};
    return g;
}

std::vector<float> random_image(int h, int w, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> img(static_cast<size_t>(h) * w);
    for (auto& v : img) v = dist(rng);
    return img;
}

double l2(const std::vector<f::cfloat>& v) {
    double acc = 0;
    for (auto& z : v) acc += static_cast<double>(z.real()) * z.real() +
                             static_cast<double>(z.imag()) * z.imag();
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("zero image transforms to zero spectrum") {
    f::KSpaceGrid g;
    g.h = 16;
    g.w = 16;
    g.samples.assign(256, {0.0f, 0.0f});
    auto k = f::fft2(g);
    for (auto& v : k.samples) {
        CHECK(v.real() == 0.0f);
        CHECK(v.imag() == 0.0f);
    }
}

TEST_CASE("unit impulse at origin gives a flat spectrum of 1/sqrt(HW)") {
    f::KSpaceGrid g;
    g.h = 8;
    g.w = 16;
    g.samples.assign(128, {0.0f, 0.0f});
    g.samples[0] = {1.0f, 0.0f};
    auto k = f::fft2(g);
    const float expect = 1.0f / std::sqrt(128.0f);
    for (auto& v : k.samples) {
        CHECK(v.real() == doctest::Approx(expect).epsilon(1e-5));
        CHECK(v.imag() == doctest::Approx(0.0f).scale(1.0));
    }
}

TEST_CASE("fft2/ifft2 round-trip on random 64x64 within 1e-5") {
    auto g = random_grid(64, 64, 11);
    auto back = f::ifft2(f::fft2(g));
    float worst = 0;
    for (size_t i = 0; i < g.samples.size(); ++i)
        worst = std::max(worst, std::abs(back.samples[i] - g.samples[i]));
    CHECK(worst < 1e-5f);
}

TEST_CASE("Parseval holds within 1e-4 relative") {
    auto g = random_grid(64, 64, 13);
    auto k = f::fft2(g);
    const double a = l2(g.samples), b = l2(k.samples);
    CHECK(std::fabs(a - b) / a < 1e-4);
}

TEST_CASE("fft2 is linear") {
    auto x = random_grid(32, 32, 3);
    auto y = random_grid(32, 32, 5);
    const f::cfloat a(0.7f, 0.0f), b(-1.3f, 0.0f);
    f::KSpaceGrid comb = x;
    for (size_t i = 0; i < comb.samples.size(); ++i)
        comb.samples[i] = a * x.samples[i] + b * y.samples[i];
    auto kc = f::fft2(comb);
    auto kx = f::fft2(x);
    auto ky = f::fft2(y);
    for (size_t i = 0; i < kc.samples.size(); ++i)
        CHECK(std::abs(kc.samples[i] - (a * kx.samples[i] + b * ky.samples[i])) < 1e-5f);
}

TEST_CASE("non-power-of-two extents are rejected") {
    f::KSpaceGrid g;
    g.h = 12;
    g.w = 16;
    g.samples.assign(192, {0.0f, 0.0f});
    CHECK_THROWS_AS(f::fft2(g), std::invalid_argument);
}

TEST_CASE("fftshift moves DC to the grid center and round-trips") {
    f::KSpaceGrid g;
    g.h = 8;
    g.w = 8;
    g.samples.assign(64, {0.0f, 0.0f});
    g.samples[0] = {1.0f, 0.0f};
    auto c = f::fftshift(g);
    CHECK(c.at(4, 4).real() == 1.0f);
    CHECK(c.layout == f::Layout::DcCentered);
    auto back = f::ifftshift(c);
    CHECK(back.samples == g.samples);
    // even extents: applying the same swap twice is the identity
    auto twice = f::fftshift(f::fftshift(g));
    CHECK(twice.samples == g.samples);
}

TEST_CASE("reconstruct with a full mask reproduces the source magnitude") {
    const int n = 32;
    auto img = random_image(n, n, 21);
    auto k = f::fftshift(f::fft2(n, n, img));
    auto rec = f::reconstruct(k, f::LineMask::full(n));
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(rec[i] == doctest::Approx(std::fabs(img[i])).epsilon(1e-4));
}

TEST_CASE("reconstruct with an empty mask is all zero") {
    const int n = 16;
    auto k = f::fftshift(f::fft2(n, n, random_image(n, n, 2)));
    auto rec = f::reconstruct(k, f::LineMask(n));
    for (float v : rec) CHECK(v == 0.0f);
}

TEST_CASE("half-mask reconstruction has strictly positive NMSE") {
    const int n = 64;
    auto img = random_image(n, n, 33);
    auto k = f::fftshift(f::fft2(n, n, img));
    f::LineMask half(n);
    for (int c = 0; c < n / 2; ++c) half.set(2 * c);
    auto rec = f::reconstruct(k, half);
    double num = 0, den = 0;
    for (size_t i = 0; i < img.size(); ++i) {
        num += (rec[i] - img[i]) * (rec[i] - img[i]);
        den += img[i] * img[i];
    }
    CHECK(num / den > 0.0);
}

TEST_CASE("masking is idempotent") {
    const int n = 32;
    auto k = f::fftshift(f::fft2(n, n, random_image(n, n, 8)));
    f::LineMask m(n);
    for (int c : {3, 15, 16, 17, 29}) m.set(c);
    auto once = f::reconstruct(k, m);
    // apply the mask to the grid, reconstruct again with the same mask
    f::KSpaceGrid masked = k;
    for (int c = 0; c < n; ++c)
        if (!m.is_acquired(c))
            for (int r = 0; r < n; ++r) masked.at(r, c) = {0.0f, 0.0f};
    auto twice = f::reconstruct(masked, m);
    CHECK(once == twice);
}

TEST_CASE("reconstruct validates mask length and layout") {
    const int n = 16;
    auto k = f::fftshift(f::fft2(n, n, random_image(n, n, 5)));
    CHECK_THROWS_AS(f::reconstruct(k, f::LineMask(n / 2)), std::invalid_argument);
    auto origin = f::ifftshift(k);
    CHECK_THROWS_AS(f::reconstruct(origin, f::LineMask::full(n)), std::invalid_argument);
}

#include "masc/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace masc::fourier {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

void check_pow2(int h, int w) {
    if (!is_power_of_two(h) || !is_power_of_two(w))
        throw std::invalid_argument("fourier: extents must be powers of two, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
}

// In-place iterative radix-2 transform of a strided line. Twiddles are
// computed in double and applied to float samples.
void fft_line(cfloat* data, int n, size_t stride, bool inverse) {
    // bit reversal
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                cfloat& a = data[(i + j) * stride];
                cfloat& b = data[(i + j + len / 2) * stride];
                const std::complex<double> u(a.real(), a.imag());
                const std::complex<double> v = std::complex<double>(b.real(), b.imag()) * w;
                a = cfloat(static_cast<float>(u.real() + v.real()),
                           static_cast<float>(u.imag() + v.imag()));
                b = cfloat(static_cast<float>(u.real() - v.real()),
                           static_cast<float>(u.imag() - v.imag()));
                w *= wl;
            }
        }
    }
}

KSpaceGrid transform2d(const KSpaceGrid& in, bool inverse) {
    check_pow2(in.h, in.w);
    KSpaceGrid out = in;
    for (int r = 0; r < out.h; ++r) fft_line(out.samples.data() + static_cast<size_t>(r) * out.w, out.w, 1, inverse);
    for (int c = 0; c < out.w; ++c) fft_line(out.samples.data() + c, out.h, out.w, inverse);
    const float scale = 1.0f / std::sqrt(static_cast<float>(out.h) * out.w);
    for (auto& v : out.samples) v *= scale;
    return out;
}

}  // namespace

KSpaceGrid fft2(const KSpaceGrid& img) {
    KSpaceGrid out = transform2d(img, false);
    out.layout = Layout::DcAtOrigin;
    return out;
}

KSpaceGrid fft2(int h, int w, const std::vector<float>& real_image) {
    if (static_cast<size_t>(h) * w != real_image.size())
        throw std::invalid_argument("fft2: image size does not match extents");
    KSpaceGrid g;
    g.h = h;
    g.w = w;
    g.layout = Layout::DcAtOrigin;
    g.samples.resize(real_image.size());
    for (size_t i = 0; i < real_image.size(); ++i) g.samples[i] = cfloat(real_image[i], 0.0f);
    return fft2(g);
}

KSpaceGrid ifft2(const KSpaceGrid& k) {
    if (k.layout != Layout::DcAtOrigin)
        throw std::invalid_argument("ifft2: expected DC-at-origin input; ifftshift first");
    KSpaceGrid out = transform2d(k, true);
    out.layout = Layout::DcAtOrigin;
    return out;
}

namespace {

KSpaceGrid quadrant_swap(const KSpaceGrid& g, Layout to) {
    check_pow2(g.h, g.w);
    KSpaceGrid out;
    out.h = g.h;
    out.w = g.w;
    out.layout = to;
    out.samples.resize(g.samples.size());
    const int hh = g.h / 2, hw = g.w / 2;
    for (int r = 0; r < g.h; ++r) {
        const int rr = (r + hh) % g.h;
        for (int c = 0; c < g.w; ++c) out.at(rr, (c + hw) % g.w) = g.at(r, c);
    }
    return out;
}

}  // namespace

KSpaceGrid fftshift(const KSpaceGrid& g) { return quadrant_swap(g, Layout::DcCentered); }
KSpaceGrid ifftshift(const KSpaceGrid& g) { return quadrant_swap(g, Layout::DcAtOrigin); }

std::vector<float> reconstruct(const KSpaceGrid& k, const LineMask& m) {
    if (k.layout != Layout::DcCentered)
        throw std::invalid_argument("reconstruct: k-space must be DC-centered");
    if (m.size() != k.w)
        throw std::invalid_argument("reconstruct: mask length " + std::to_string(m.size()) +
                                    " does not match " + std::to_string(k.w) +
                                    " phase-encode lines");
    KSpaceGrid masked = k;
    for (int c = 0; c < k.w; ++c) {
        if (m.is_acquired(c)) continue;
        for (int r = 0; r < k.h; ++r) masked.at(r, c) = cfloat(0.0f, 0.0f);
    }
    KSpaceGrid img = ifft2(ifftshift(masked));
    std::vector<float> mag(img.samples.size());
    for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(img.samples[i]);
    return mag;
}

}  // namespace masc::fourier

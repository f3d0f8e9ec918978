#pragma once

// Radix-2 2D transforms and phase-encode line masking. Grids are row-major
// H x W; phase-encode lines are columns (the width axis). Both transforms
// are unitary (1/sqrt(HW) each direction), so fft2/ifft2 round-trip exactly
// and Parseval holds.

#include <complex>
#include <cstdint>
#include <vector>

namespace masc::fourier {

using cfloat = std::complex<float>;

enum class Layout { DcCentered, DcAtOrigin };

struct KSpaceGrid {
    int h = 0;
    int w = 0;
    Layout layout = Layout::DcAtOrigin;
    std::vector<cfloat> samples;  // row-major h*w

    cfloat& at(int r, int c) { return samples[static_cast<size_t>(r) * w + c]; }
    const cfloat& at(int r, int c) const { return samples[static_cast<size_t>(r) * w + c]; }
};

// Binary mask over phase-encode lines (grid columns).
struct LineMask {
    std::vector<std::uint8_t> acquired;

    explicit LineMask(int n_pe = 0) : acquired(n_pe, 0) {}
    int size() const { return static_cast<int>(acquired.size()); }
    bool is_acquired(int line) const { return acquired[line] != 0; }
    void set(int line) { acquired[line] = 1; }
    int popcount() const {
        int n = 0;
        for (auto v : acquired) n += v;
        return n;
    }
    static LineMask full(int n_pe) {
        LineMask m(n_pe);
        for (auto& v : m.acquired) v = 1;
        return m;
    }
};

bool is_power_of_two(int n);

// Unitary forward transform of a complex grid; output is DC-at-origin.
KSpaceGrid fft2(const KSpaceGrid& img);
KSpaceGrid fft2(int h, int w, const std::vector<float>& real_image);
// Unitary inverse; input must be DC-at-origin.
KSpaceGrid ifft2(const KSpaceGrid& k);

// Quadrant swap between DC-at-origin and DC-centered layouts.
KSpaceGrid fftshift(const KSpaceGrid& g);
KSpaceGrid ifftshift(const KSpaceGrid& g);

// |F^-1(K .* M)| for a DC-centered grid; unacquired columns are zero-filled.
std::vector<float> reconstruct(const KSpaceGrid& k, const LineMask& m);

}  // namespace masc::fourier

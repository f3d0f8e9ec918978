#include "masc/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "masc/fourier.hpp"
#include "masc/rng.hpp"

namespace masc::phantom {

const Tissue& TissueMaps::tissue_of(std::uint8_t lbl) const {
    for (const auto& t : table)
        if (t.label == lbl) return t;
    throw std::invalid_argument("phantom: label " + std::to_string(lbl) + " missing from table");
}

std::vector<Tissue> default_tissue_table() {
    // chi values mirror the simulation defaults: soft tissue/water -9.05,
    // cortical bone -8.86, fat(-like) -5.55 ppm.
    return {
        {0, "air", 0.00f, 1.0f, 1.0f, 0.0f},
        {1, "fat", 0.90f, 380.0f, 100.0f, -5.55f},
        {2, "muscle", 0.70f, 1400.0f, 40.0f, -9.05f},
        {3, "bone", 0.15f, 250.0f, 2.0f, -8.86f},
        {4, "marrow", 0.95f, 370.0f, 130.0f, -5.55f},
        {5, "water", 1.00f, 4000.0f, 2000.0f, -9.05f},
    };
}

namespace {

struct Ellipse {
    double cy, cx, ry, rx, theta;

    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double ct = std::cos(theta), st = std::sin(theta);
        const double u = (dx * ct + dy * st) / rx;
        const double v = (-dx * st + dy * ct) / ry;
        return u * u + v * v <= 1.0;
    }
};

void paint(TissueMaps& maps, const Ellipse& e, const Tissue& t) {
    for (int i = 0; i < maps.h; ++i)
        for (int j = 0; j < maps.w; ++j)
            if (e.contains(i, j)) {
                const size_t idx = static_cast<size_t>(i) * maps.w + j;
                maps.label[idx] = t.label;
                maps.pd[idx] = t.pd;
                maps.t1_ms[idx] = t.t1_ms;
                maps.t2_ms[idx] = t.t2_ms;
            }
}

}  // namespace

TissueMaps generate_phantom(std::uint64_t seed, const GeometryConfig& cfg) {
    if (!fourier::is_power_of_two(cfg.h) || !fourier::is_power_of_two(cfg.w))
        throw std::invalid_argument("generate_phantom: extents must be powers of two");
    const auto table = cfg.table.empty() ? default_tissue_table() : cfg.table;
    if (table.empty() || table[0].pd != 0.0f)
        throw std::invalid_argument("generate_phantom: table entry 0 must be air with PD=0");

    TissueMaps maps;
    maps.h = cfg.h;
    maps.w = cfg.w;
    maps.table = table;
    const size_t n = static_cast<size_t>(cfg.h) * cfg.w;
    maps.label.assign(n, 0);
    maps.pd.assign(n, table[0].pd);
    maps.t1_ms.assign(n, table[0].t1_ms);
    maps.t2_ms.assign(n, table[0].t2_ms);

    auto rng = rng::stream(seed, "phantom");
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double cy = cfg.h / 2.0, cx = cfg.w / 2.0;
    Ellipse body{cy, cx, (0.34 + 0.08 * unit(rng)) * cfg.h, (0.34 + 0.08 * unit(rng)) * cfg.w,
                 (unit(rng) - 0.5) * 0.6};
    paint(maps, body, table[2]);  // muscle body

    std::uniform_int_distribution<int> count_dist(cfg.min_shapes, cfg.max_shapes);
    std::uniform_int_distribution<int> tissue_dist(1, static_cast<int>(table.size()) - 1);
    const int shapes = count_dist(rng);
    for (int s = 0; s < shapes; ++s) {
        Ellipse e{};
        // Degenerate draws are regenerated; radii below 2 px never leave here.
        do {
            const double ang = 2.0 * std::numbers::pi * unit(rng);
            const double rad = 0.55 * std::min(body.ry, body.rx) * std::sqrt(unit(rng));
            e.cy = cy + rad * std::sin(ang);
            e.cx = cx + rad * std::cos(ang);
            e.ry = (0.04 + 0.14 * unit(rng)) * cfg.h;
            e.rx = (0.04 + 0.14 * unit(rng)) * cfg.w;
            e.theta = std::numbers::pi * unit(rng);
        } while (e.ry < 2.0 || e.rx < 2.0);
        paint(maps, e, table[tissue_dist(rng)]);
    }
    return maps;
}

std::vector<float> spin_echo_signal(const TissueMaps& maps, const SequenceParams& seq) {
    if (seq.tr_ms <= 0 || seq.te_ms <= 0 || seq.te_ms >= seq.tr_ms)
        throw std::invalid_argument("spin_echo_signal: require 0 < TE < TR");
    std::vector<float> s(maps.pd.size(), 0.0f);
    for (size_t i = 0; i < s.size(); ++i) {
        if (maps.pd[i] == 0.0f) continue;
        const double e1 = 1.0 - std::exp(-static_cast<double>(seq.tr_ms) / maps.t1_ms[i]);
        const double e2 = std::exp(-static_cast<double>(seq.te_ms) / maps.t2_ms[i]);
        s[i] = static_cast<float>(maps.pd[i] * e1 * e2);
    }
    return s;
}

}  // namespace masc::phantom

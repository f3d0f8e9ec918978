#pragma once

// The fixed operator set for the two small networks and their losses.
// Layout conventions: images are [N,C,H,W] row-major, feature matrices are
// [N,F], distributions live on the last axis. Every op checks shapes and
// installs an analytic pull() for the reverse pass.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "masc/gemm.hpp"
#include "masc/tensor.hpp"

namespace masc::diff {

namespace detail {

template <typename S>
std::shared_ptr<Node<S>> new_node(Shape shape, std::vector<std::shared_ptr<Node<S>>> parents) {
    auto n = std::make_shared<Node<S>>();
    n->value.resize(static_cast<size_t>(shape_numel(shape)));
    n->shape = std::move(shape);
    n->parents = std::move(parents);
    n->id = next_node_id();
    return n;
}

template <typename S>
void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        op_error(op, "operand shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename S>
void check_rank(const char* op, const TensorT<S>& t, size_t rank) {
    if (t.shape().size() != rank)
        op_error(op, "expected rank-" + std::to_string(rank) + " tensor, got " + shape_str(t.shape()));
}

// Reusable per-thread scratch for im2col style buffers.
template <typename S>
std::vector<S>& scratch(int which) {
    static thread_local std::vector<S> bufs[4];
    return bufs[which];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("add", a, b);
    auto n = detail::new_node<S>(a.shape(), {a.node(), b.node()});
    const S* pa = a.data();
    const S* pb = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] + pb[i];
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            ga[i] += self.grad[i];
            gb[i] += self.grad[i];
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("sub", a, b);
    auto n = detail::new_node<S>(a.shape(), {a.node(), b.node()});
    const S* pa = a.data();
    const S* pb = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] - pb[i];
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            ga[i] += self.grad[i];
            gb[i] -= self.grad[i];
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("mul", a, b);
    auto n = detail::new_node<S>(a.shape(), {a.node(), b.node()});
    const S* pa = a.data();
    const S* pb = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] * pb[i];
    n->pull = [](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& pb = self.parents[1]->value;
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            ga[i] += self.grad[i] * pb[i];
            gb[i] += self.grad[i] * pa[i];
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("div", a, b);
    auto n = detail::new_node<S>(a.shape(), {a.node(), b.node()});
    const S* pa = a.data();
    const S* pb = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] / pb[i];
    n->pull = [](Node<S>& self) {
        auto& pb = self.parents[1]->value;
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const S inv = S(1) / pb[i];
            ga[i] += self.grad[i] * inv;
            gb[i] -= self.grad[i] * self.value[i] * inv;
        }
    };
    return TensorT<S>(n);
}

// Ties give the gradient to the first argument.
template <typename S>
TensorT<S> minimum(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("minimum", a, b);
    auto n = detail::new_node<S>(a.shape(), {a.node(), b.node()});
    const S* pa = a.data();
    const S* pb = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::min(pa[i], pb[i]);
    n->pull = [](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& pb = self.parents[1]->value;
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (pa[i] <= pb[i])
                ga[i] += self.grad[i];
            else
                gb[i] += self.grad[i];
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] + c;
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& a, S c) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] * c;
    n->pull = [c](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += c * self.grad[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> neg(const TensorT<S>& a) {
    return mul_scalar(a, S(-1));
}

template <typename S>
TensorT<S> relu(const TensorT<S>& a) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = pa[i] > S(0) ? pa[i] : S(0);
    n->pull = [](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (pa[i] > S(0)) ga[i] += self.grad[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> abs(const TensorT<S>& a) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::fabs(pa[i]);
    n->pull = [](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (pa[i] > S(0))
                ga[i] += self.grad[i];
            else if (pa[i] < S(0))
                ga[i] -= self.grad[i];
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> log(const TensorT<S>& a) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::log(pa[i]);
    n->pull = [](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] / pa[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> exp(const TensorT<S>& a) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::exp(pa[i]);
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * self.value[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> clamp(const TensorT<S>& a, S lo, S hi) {
    auto n = detail::new_node<S>(a.shape(), {a.node()});
    const S* pa = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::clamp(pa[i], lo, hi);
    n->pull = [lo, hi](Node<S>& self) {
        auto& pa = self.parents[0]->value;
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (pa[i] >= lo && pa[i] <= hi) ga[i] += self.grad[i];
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> square(const TensorT<S>& a) {
    return mul(a, a);
}

// ---------------------------------------------------------------------------
// Reductions and reshapes

template <typename S>
TensorT<S> sum_all(const TensorT<S>& a) {
    auto n = detail::new_node<S>(Shape{1}, {a.node()});
    S acc = 0;
    const S* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
    n->value[0] = acc;
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        const S g = self.grad[0];
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& a) {
    const S inv = S(1) / static_cast<S>(a.numel());
    return mul_scalar(sum_all(a), inv);
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        op_error("reshape", "cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto n = detail::new_node<S>(std::move(shape), {a.node()});
    n->value = a.values();
    n->pull = [](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    };
    return TensorT<S>(n);
}

// ---------------------------------------------------------------------------
// Dense layers

// x [N,F] * w [O,F]^T + b [O] -> [N,O]
template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    detail::check_rank("linear", x, 2);
    detail::check_rank("linear", w, 2);
    const int batch = x.shape()[0], in = x.shape()[1], out = w.shape()[0];
    if (w.shape()[1] != in)
        op_error("linear", "input features " + shape_str(x.shape()) + " do not match weight " +
                               shape_str(w.shape()));
    if (b.shape() != Shape{out})
        op_error("linear", "bias " + shape_str(b.shape()) + " does not match out features " +
                               std::to_string(out));
    auto n = detail::new_node<S>(Shape{batch, out}, {x.node(), w.node(), b.node()});
    gemm<S>(Trans::N, Trans::T, batch, out, in, x.data(), w.data(), n->value.data(), false);
    const S* pb = b.data();
    for (int i = 0; i < batch; ++i)
        for (int o = 0; o < out; ++o) n->value[static_cast<size_t>(i) * out + o] += pb[o];
    n->pull = [batch, in, out](Node<S>& self) {
        const S* g = self.grad.data();
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        auto& pbn = self.parents[2];
        gemm<S>(Trans::N, Trans::N, batch, in, out, g, pw->value.data(), px->grad.data(), true);
        gemm<S>(Trans::T, Trans::N, out, in, batch, g, px->value.data(), pw->grad.data(), true);
        for (int i = 0; i < batch; ++i)
            for (int o = 0; o < out; ++o) pbn->grad[o] += g[static_cast<size_t>(i) * out + o];
    };
    return TensorT<S>(n);
}

namespace detail {

// col is [Ci*kh*kw x H*W]; zero padding keeps the spatial extent.
template <typename S>
void im2col(const S* x, int ci, int h, int w, int kh, int kw, S* col) {
    const int ph = kh / 2, pw = kw / 2;
    size_t r = 0;
    for (int c = 0; c < ci; ++c) {
        const S* img = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++r) {
                S* row = col + r * h * w;
                const int dx = kx - pw;
                const int lo = std::max(0, -dx), hi = std::min(w, w - dx);
                for (int oy = 0; oy < h; ++oy) {
                    S* dst = row + static_cast<size_t>(oy) * w;
                    const int iy = oy + ky - ph;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + w, S(0));
                        continue;
                    }
                    const S* src = img + static_cast<size_t>(iy) * w + dx;
                    if (lo > 0) std::fill(dst, dst + lo, S(0));
                    std::copy(src + lo, src + hi, dst + lo);
                    if (hi < w) std::fill(dst + hi, dst + w, S(0));
                }
            }
        }
    }
}

// Transpose of im2col: scatter-adds col rows back into the image.
template <typename S>
void col2im_add(const S* col, int ci, int h, int w, int kh, int kw, S* x) {
    const int ph = kh / 2, pw = kw / 2;
    size_t r = 0;
    for (int c = 0; c < ci; ++c) {
        S* img = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++r) {
                const S* row = col + r * h * w;
                const int dx = kx - pw;
                const int lo = std::max(0, -dx), hi = std::min(w, w - dx);
                for (int oy = 0; oy < h; ++oy) {
                    const int iy = oy + ky - ph;
                    if (iy < 0 || iy >= h) continue;
                    S* dst = img + static_cast<size_t>(iy) * w + dx;
                    const S* src = row + static_cast<size_t>(oy) * w;
                    for (int ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution family

// x [N,Ci,H,W], w [Co,Ci,kh,kw] (odd kernel, stride 1, zero padding keeps the
// extent), b [Co] -> [N,Co,H,W]
template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    detail::check_rank("conv2d", x, 4);
    detail::check_rank("conv2d", w, 4);
    const int batch = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
    const int co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != ci)
        op_error("conv2d", "input channels " + shape_str(x.shape()) + " do not match weight " +
                               shape_str(w.shape()));
    if (kh % 2 == 0 || kw % 2 == 0)
        op_error("conv2d", "kernel extents must be odd, got " + shape_str(w.shape()));
    if (b.shape() != Shape{co})
        op_error("conv2d", "bias " + shape_str(b.shape()) + " does not match out channels " +
                               std::to_string(co));
    const int k = ci * kh * kw, p = h * wd;
    auto n = detail::new_node<S>(Shape{batch, co, h, wd}, {x.node(), w.node(), b.node()});
    auto& col = detail::scratch<S>(0);
    col.resize(static_cast<size_t>(k) * p);
    const S* pb = b.data();
    for (int img = 0; img < batch; ++img) {
        const S* xin = x.data() + static_cast<size_t>(img) * ci * p;
        S* yout = n->value.data() + static_cast<size_t>(img) * co * p;
        detail::im2col(xin, ci, h, wd, kh, kw, col.data());
        gemm<S>(Trans::N, Trans::N, co, p, k, w.data(), col.data(), yout, false);
        for (int c = 0; c < co; ++c) {
            S* row = yout + static_cast<size_t>(c) * p;
            for (int i = 0; i < p; ++i) row[i] += pb[c];
        }
    }
    n->pull = [batch, ci, h, wd, co, kh, kw, k, p](Node<S>& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        auto& pbn = self.parents[2];
        auto& col = detail::scratch<S>(0);
        auto& dcol = detail::scratch<S>(1);
        col.resize(static_cast<size_t>(k) * p);
        dcol.resize(static_cast<size_t>(k) * p);
        for (int img = 0; img < batch; ++img) {
            const S* xin = px->value.data() + static_cast<size_t>(img) * ci * p;
            const S* gy = self.grad.data() + static_cast<size_t>(img) * co * p;
            detail::im2col(xin, ci, h, wd, kh, kw, col.data());
            gemm<S>(Trans::N, Trans::T, co, k, p, gy, col.data(), pw->grad.data(), true);
            gemm<S>(Trans::T, Trans::N, k, p, co, pw->value.data(), gy, dcol.data(), false);
            detail::col2im_add(dcol.data(), ci, h, wd, kh, kw,
                               px->grad.data() + static_cast<size_t>(img) * ci * p);
            for (int c = 0; c < co; ++c) {
                const S* row = gy + static_cast<size_t>(c) * p;
                S acc = 0;
                for (int i = 0; i < p; ++i) acc += row[i];
                pbn->grad[c] += acc;
            }
        }
    };
    return TensorT<S>(n);
}

// 2x2 max pooling, stride 2; even extents required. Ties resolve to the
// first element in scan order.
template <typename S>
TensorT<S> maxpool2(const TensorT<S>& x) {
    detail::check_rank("maxpool2", x, 4);
    const int batch = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (h % 2 || w % 2)
        op_error("maxpool2", "extents must be even, got " + shape_str(x.shape()));
    const int oh = h / 2, ow = w / 2;
    auto n = detail::new_node<S>(Shape{batch, c, oh, ow}, {x.node()});
    auto arg = std::make_shared<std::vector<std::int32_t>>(n->value.size());
    const S* px = x.data();
    for (int nc = 0; nc < batch * c; ++nc) {
        const S* plane = px + static_cast<size_t>(nc) * h * w;
        S* out = n->value.data() + static_cast<size_t>(nc) * oh * ow;
        std::int32_t* am = arg->data() + static_cast<size_t>(nc) * oh * ow;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                const int base = 2 * i * w + 2 * j;
                int best = base;
                S v = plane[base];
                const int cand[3] = {base + 1, base + w, base + w + 1};
                for (int t = 0; t < 3; ++t)
                    if (plane[cand[t]] > v) v = plane[cand[t]], best = cand[t];
                out[i * ow + j] = v;
                am[i * ow + j] = best;
            }
        }
    }
    n->pull = [arg, h, w, oh, ow](Node<S>& self) {
        auto& gx = self.parents[0]->grad;
        const int planes = self.shape[0] * self.shape[1];
        for (int nc = 0; nc < planes; ++nc) {
            S* gp = gx.data() + static_cast<size_t>(nc) * h * w;
            const S* go = self.grad.data() + static_cast<size_t>(nc) * oh * ow;
            const std::int32_t* am = arg->data() + static_cast<size_t>(nc) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) gp[am[i]] += go[i];
        }
    };
    return TensorT<S>(n);
}

namespace detail {

// Half-pixel source coordinate for factor-2 bilinear resize, clamped taps.
inline void bilinear_taps(int out, int idx, int in_extent, int& i0, int& i1, double& w1) {
    (void)out;
    const double src = (idx + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    i0 = std::clamp(static_cast<int>(f), 0, in_extent - 1);
    i1 = std::clamp(static_cast<int>(f) + 1, 0, in_extent - 1);
    w1 = src - f;
}

}  // namespace detail

// Factor-2 bilinear upsample of [N,C,H,W] -> [N,C,2H,2W].
template <typename S>
TensorT<S> upsample_bilinear2(const TensorT<S>& x) {
    detail::check_rank("upsample_bilinear2", x, 4);
    const int batch = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const int oh = 2 * h, ow = 2 * w;
    auto n = detail::new_node<S>(Shape{batch, c, oh, ow}, {x.node()});
    const S* px = x.data();
    for (int nc = 0; nc < batch * c; ++nc) {
        const S* in = px + static_cast<size_t>(nc) * h * w;
        S* out = n->value.data() + static_cast<size_t>(nc) * oh * ow;
        for (int i = 0; i < oh; ++i) {
            int y0, y1;
            double wy;
            detail::bilinear_taps(oh, i, h, y0, y1, wy);
            for (int j = 0; j < ow; ++j) {
                int x0, x1;
                double wx;
                detail::bilinear_taps(ow, j, w, x0, x1, wx);
                const double v00 = in[y0 * w + x0], v01 = in[y0 * w + x1];
                const double v10 = in[y1 * w + x0], v11 = in[y1 * w + x1];
                out[i * ow + j] = static_cast<S>((1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                                 wy * ((1 - wx) * v10 + wx * v11));
            }
        }
    }
    n->pull = [h, w, oh, ow](Node<S>& self) {
        auto& gx = self.parents[0]->grad;
        const int planes = self.shape[0] * self.shape[1];
        for (int nc = 0; nc < planes; ++nc) {
            S* gp = gx.data() + static_cast<size_t>(nc) * h * w;
            const S* go = self.grad.data() + static_cast<size_t>(nc) * oh * ow;
            for (int i = 0; i < oh; ++i) {
                int y0, y1;
                double wy;
                detail::bilinear_taps(oh, i, h, y0, y1, wy);
                for (int j = 0; j < ow; ++j) {
                    int x0, x1;
                    double wx;
                    detail::bilinear_taps(ow, j, w, x0, x1, wx);
                    const S g = go[i * ow + j];
                    gp[y0 * w + x0] += static_cast<S>((1 - wy) * (1 - wx)) * g;
                    gp[y0 * w + x1] += static_cast<S>((1 - wy) * wx) * g;
                    gp[y1 * w + x0] += static_cast<S>(wy * (1 - wx)) * g;
                    gp[y1 * w + x1] += static_cast<S>(wy * wx) * g;
                }
            }
        }
    };
    return TensorT<S>(n);
}

// Concatenate [N,C1,H,W] and [N,C2,H,W] along the channel axis.
template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_rank("concat_channels", a, 4);
    detail::check_rank("concat_channels", b, 4);
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
        op_error("concat_channels",
                 "shapes " + shape_str(sa) + " and " + shape_str(sb) + " differ beyond channels");
    const int batch = sa[0], c1 = sa[1], c2 = sb[1], hw = sa[2] * sa[3];
    auto n = detail::new_node<S>(Shape{batch, c1 + c2, sa[2], sa[3]}, {a.node(), b.node()});
    for (int img = 0; img < batch; ++img) {
        S* dst = n->value.data() + static_cast<size_t>(img) * (c1 + c2) * hw;
        std::copy_n(a.data() + static_cast<size_t>(img) * c1 * hw, static_cast<size_t>(c1) * hw, dst);
        std::copy_n(b.data() + static_cast<size_t>(img) * c2 * hw, static_cast<size_t>(c2) * hw,
                    dst + static_cast<size_t>(c1) * hw);
    }
    n->pull = [batch, c1, c2, hw](Node<S>& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (int img = 0; img < batch; ++img) {
            const S* g = self.grad.data() + static_cast<size_t>(img) * (c1 + c2) * hw;
            S* da = ga.data() + static_cast<size_t>(img) * c1 * hw;
            S* db = gb.data() + static_cast<size_t>(img) * c2 * hw;
            for (size_t i = 0; i < static_cast<size_t>(c1) * hw; ++i) da[i] += g[i];
            for (size_t i = 0; i < static_cast<size_t>(c2) * hw; ++i)
                db[i] += g[static_cast<size_t>(c1) * hw + i];
        }
    };
    return TensorT<S>(n);
}

// Per-(sample, channel) normalization over H*W with learnable affine.
template <typename S>
TensorT<S> instance_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                         S eps = S(1e-5)) {
    detail::check_rank("instance_norm", x, 4);
    const int batch = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        op_error("instance_norm", "affine parameters must be [" + std::to_string(c) + "], got " +
                                      shape_str(gamma.shape()) + " / " + shape_str(beta.shape()));
    auto n = detail::new_node<S>(x.shape(), {x.node(), gamma.node(), beta.node()});
    auto stats = std::make_shared<std::vector<S>>(static_cast<size_t>(batch) * c * 2);
    const S* px = x.data();
    const S* pg = gamma.data();
    const S* pbt = beta.data();
    for (int nc = 0; nc < batch * c; ++nc) {
        const S* in = px + static_cast<size_t>(nc) * hw;
        S* out = n->value.data() + static_cast<size_t>(nc) * hw;
        S mean = 0;
        for (int i = 0; i < hw; ++i) mean += in[i];
        mean /= static_cast<S>(hw);
        S var = 0;
        for (int i = 0; i < hw; ++i) var += (in[i] - mean) * (in[i] - mean);
        var /= static_cast<S>(hw);
        const S inv = S(1) / std::sqrt(var + eps);
        const S g = pg[nc % c], b = pbt[nc % c];
        for (int i = 0; i < hw; ++i) out[i] = g * (in[i] - mean) * inv + b;
        (*stats)[2 * nc] = mean;
        (*stats)[2 * nc + 1] = inv;
    }
    n->pull = [stats, batch, c, hw](Node<S>& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        for (int nc = 0; nc < batch * c; ++nc) {
            const S mean = (*stats)[2 * nc], inv = (*stats)[2 * nc + 1];
            const S gamma = pg->value[nc % c];
            const S* in = px->value.data() + static_cast<size_t>(nc) * hw;
            const S* go = self.grad.data() + static_cast<size_t>(nc) * hw;
            S* gx = px->grad.data() + static_cast<size_t>(nc) * hw;
            S sum_g = 0, sum_gx = 0;
            for (int i = 0; i < hw; ++i) {
                const S xh = (in[i] - mean) * inv;
                sum_g += go[i];
                sum_gx += go[i] * xh;
            }
            pg->grad[nc % c] += sum_gx;
            pb->grad[nc % c] += sum_g;
            const S mg = sum_g / static_cast<S>(hw);
            const S mgx = sum_gx / static_cast<S>(hw);
            for (int i = 0; i < hw; ++i) {
                const S xh = (in[i] - mean) * inv;
                gx[i] += gamma * inv * (go[i] - mg - xh * mgx);
            }
        }
    };
    return TensorT<S>(n);
}

// ---------------------------------------------------------------------------
// Distributions over the last axis of [N,A]

template <typename S>
TensorT<S> softmax(const TensorT<S>& x) {
    detail::check_rank("softmax", x, 2);
    const int batch = x.shape()[0], a = x.shape()[1];
    auto n = detail::new_node<S>(x.shape(), {x.node()});
    const S* px = x.data();
    for (int i = 0; i < batch; ++i) {
        const S* in = px + static_cast<size_t>(i) * a;
        S* out = n->value.data() + static_cast<size_t>(i) * a;
        S mx = in[0];
        for (int j = 1; j < a; ++j) mx = std::max(mx, in[j]);
        S z = 0;
        for (int j = 0; j < a; ++j) z += (out[j] = std::exp(in[j] - mx));
        const S inv = S(1) / z;
        for (int j = 0; j < a; ++j) out[j] *= inv;
    }
    n->pull = [batch, a](Node<S>& self) {
        auto& gx = self.parents[0]->grad;
        for (int i = 0; i < batch; ++i) {
            const S* y = self.value.data() + static_cast<size_t>(i) * a;
            const S* g = self.grad.data() + static_cast<size_t>(i) * a;
            S dot = 0;
            for (int j = 0; j < a; ++j) dot += g[j] * y[j];
            S* out = gx.data() + static_cast<size_t>(i) * a;
            for (int j = 0; j < a; ++j) out[j] += y[j] * (g[j] - dot);
        }
    };
    return TensorT<S>(n);
}

template <typename S>
TensorT<S> log_softmax(const TensorT<S>& x) {
    detail::check_rank("log_softmax", x, 2);
    const int batch = x.shape()[0], a = x.shape()[1];
    auto n = detail::new_node<S>(x.shape(), {x.node()});
    const S* px = x.data();
    for (int i = 0; i < batch; ++i) {
        const S* in = px + static_cast<size_t>(i) * a;
        S* out = n->value.data() + static_cast<size_t>(i) * a;
        S mx = in[0];
        for (int j = 1; j < a; ++j) mx = std::max(mx, in[j]);
        S z = 0;
        for (int j = 0; j < a; ++j) z += std::exp(in[j] - mx);
        const S lse = mx + std::log(z);
        for (int j = 0; j < a; ++j) out[j] = in[j] - lse;
    }
    n->pull = [batch, a](Node<S>& self) {
        auto& gx = self.parents[0]->grad;
        for (int i = 0; i < batch; ++i) {
            const S* lp = self.value.data() + static_cast<size_t>(i) * a;
            const S* g = self.grad.data() + static_cast<size_t>(i) * a;
            S gsum = 0;
            for (int j = 0; j < a; ++j) gsum += g[j];
            S* out = gx.data() + static_cast<size_t>(i) * a;
            for (int j = 0; j < a; ++j) out[j] += g[j] - std::exp(lp[j]) * gsum;
        }
    };
    return TensorT<S>(n);
}

// Picks x[i, idx[i]] per row -> [N].
template <typename S>
TensorT<S> gather(const TensorT<S>& x, const std::vector<int>& idx) {
    detail::check_rank("gather", x, 2);
    const int batch = x.shape()[0], a = x.shape()[1];
    if (static_cast<int>(idx.size()) != batch)
        op_error("gather", "index count " + std::to_string(idx.size()) + " does not match batch " +
                               std::to_string(batch));
    auto n = detail::new_node<S>(Shape{batch}, {x.node()});
    for (int i = 0; i < batch; ++i) {
        if (idx[i] < 0 || idx[i] >= a)
            op_error("gather", "index " + std::to_string(idx[i]) + " out of range [0," +
                                   std::to_string(a) + ")");
        n->value[i] = x.data()[static_cast<size_t>(i) * a + idx[i]];
    }
    auto keep = std::make_shared<std::vector<int>>(idx);
    n->pull = [keep, a](Node<S>& self) {
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < self.grad.size(); ++i)
            gx[i * a + (*keep)[i]] += self.grad[i];
    };
    return TensorT<S>(n);
}

// ---------------------------------------------------------------------------
// Gaussian-window local statistics (SSIM building block)

// Separable valid-mode correlation of [N,C,H,W] with a 1D window applied to
// both axes; output is [N,C,H-k+1,W-k+1].
template <typename S>
TensorT<S> gauss_filter_valid(const TensorT<S>& x, const std::vector<S>& window) {
    detail::check_rank("gauss_filter_valid", x, 4);
    const int batch = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const int k = static_cast<int>(window.size());
    if (k < 1 || h < k || w < k)
        op_error("gauss_filter_valid", "window " + std::to_string(k) + " exceeds image " +
                                           shape_str(x.shape()));
    const int oh = h - k + 1, ow = w - k + 1;
    auto n = detail::new_node<S>(Shape{batch, c, oh, ow}, {x.node()});
    auto win = std::make_shared<std::vector<S>>(window);
    auto& tmp = detail::scratch<S>(2);
    tmp.resize(static_cast<size_t>(h) * ow);
    const S* px = x.data();
    for (int nc = 0; nc < batch * c; ++nc) {
        const S* in = px + static_cast<size_t>(nc) * h * w;
        S* out = n->value.data() + static_cast<size_t>(nc) * oh * ow;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < ow; ++j) {
                S acc = 0;
                for (int t = 0; t < k; ++t) acc += window[t] * in[i * w + j + t];
                tmp[i * ow + j] = acc;
            }
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                S acc = 0;
                for (int t = 0; t < k; ++t) acc += window[t] * tmp[(i + t) * ow + j];
                out[i * ow + j] = acc;
            }
    }
    n->pull = [win, h, w, oh, ow, k](Node<S>& self) {
        const int planes = self.shape[0] * self.shape[1];
        std::vector<S> dtmp(static_cast<size_t>(h) * ow);
        auto& gx = self.parents[0]->grad;
        for (int nc = 0; nc < planes; ++nc) {
            const S* go = self.grad.data() + static_cast<size_t>(nc) * oh * ow;
            S* gi = gx.data() + static_cast<size_t>(nc) * h * w;
            std::fill(dtmp.begin(), dtmp.end(), S(0));
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const S g = go[i * ow + j];
                    for (int t = 0; t < k; ++t) dtmp[(i + t) * ow + j] += (*win)[t] * g;
                }
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < ow; ++j) {
                    const S g = dtmp[i * ow + j];
                    for (int t = 0; t < k; ++t) gi[i * w + j + t] += (*win)[t] * g;
                }
        }
    };
    return TensorT<S>(n);
}

// Normalized 1D Gaussian window of odd size.
template <typename S>
std::vector<S> gaussian_window(int size, double sigma) {
    std::vector<S> w(size);
    const double c = (size - 1) / 2.0;
    double total = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        w[i] = static_cast<S>(std::exp(-d * d / (2.0 * sigma * sigma)));
        total += w[i];
    }
    for (auto& v : w) v = static_cast<S>(v / total);
    return w;
}

}  // namespace masc::diff

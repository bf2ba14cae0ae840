#pragma once

#include <cassert>
#include <string>

#include "aabcos/fft.hpp"
#include "aabcos/tensor.hpp"

namespace aabcos {

enum class PoolKind { Strided, BlurPool, FLCPool };

inline std::string pool_kind_name(PoolKind k) {
    switch (k) {
        case PoolKind::Strided: return "strided";
        case PoolKind::BlurPool: return "blurpool";
        case PoolKind::FLCPool: return "flc";
    }
    return "?";
}

inline PoolKind pool_kind_from(const std::string& s) {
    if (s == "strided") return PoolKind::Strided;
    if (s == "blurpool") return PoolKind::BlurPool;
    if (s == "flc") return PoolKind::FLCPool;
    throw ConfigError("unknown pool variant '" + s + "' (expected strided|blurpool|flc)");
}

// Downsampling variant. blur_kernel applies to BlurPool only; default is the
// 3x3 binomial outer([1,2,1]/4).
struct PoolVariant {
    PoolKind kind = PoolKind::FLCPool;
    std::int64_t stride = 2;
    std::int64_t blur_kh = 3, blur_kw = 3;
    std::vector<double> blur_kernel = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16,
                                       2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};

    void validate() const {
        if (stride < 2) throw ConfigError("pooling stride must be >= 2");
        if (kind == PoolKind::BlurPool) {
            if (blur_kh <= 0 || blur_kw <= 0 ||
                static_cast<std::int64_t>(blur_kernel.size()) != blur_kh * blur_kw)
                throw ConfigError("blur kernel size mismatch");
            double sum = 0.0;
            for (double v : blur_kernel) {
                if (v < 0.0) throw ConfigError("blur kernel entries must be non-negative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("blur kernel must sum to 1");
        }
    }
};

namespace detail {

// reflect-101 (mirror about the edge sample; edge not repeated)
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace detail

// Depthwise blur (reflect padding) followed by subsampling every stride-th
// element starting at index 0. Linear and differentiable.
template <typename T>
TensorT<T> blurpool(const TensorT<T>& x, const std::vector<double>& kernel, std::int64_t kh,
                    std::int64_t kw, std::int64_t stride) {
    if (x.shape().size() != 4) throw ShapeError("blurpool: expected [N,C,H,W]");
    if (stride <= 0) throw ShapeError("blurpool: stride must be positive");
    if (static_cast<std::int64_t>(kernel.size()) != kh * kw) throw ShapeError("blurpool: kernel size mismatch");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
    const std::int64_t ch = kh / 2, cw = kw / 2;
    std::vector<T> out(static_cast<std::size_t>(n * c * ho * wo), T(0));
    for (std::int64_t p = 0; p < n * c; ++p) {
        const T* src = x.values().data() + p * h * w;
        T* dst = out.data() + p * ho * wo;
        for (std::int64_t oi = 0; oi < ho; ++oi)
            for (std::int64_t oj = 0; oj < wo; ++oj) {
                double acc = 0.0;
                for (std::int64_t ki = 0; ki < kh; ++ki) {
                    std::int64_t ii = detail::reflect_index(oi * stride + ki - ch, h);
                    for (std::int64_t kj = 0; kj < kw; ++kj) {
                        std::int64_t jj = detail::reflect_index(oj * stride + kj - cw, w);
                        acc += kernel[static_cast<std::size_t>(ki * kw + kj)] *
                               static_cast<double>(src[ii * w + jj]);
                    }
                }
                dst[oi * wo + oj] = static_cast<T>(acc);
            }
    }
    auto xn = x.node();
    auto ker = std::make_shared<std::vector<double>>(kernel);
    return TensorT<T>::make_op({n, c, ho, wo}, std::move(out), {x},
                               [xn, ker, n, c, h, w, ho, wo, kh, kw, ch, cw, stride](auto& nd) {
        for (std::int64_t p = 0; p < n * c; ++p) {
            const T* g = nd.grad.data() + p * ho * wo;
            T* dst = xn->grad.data() + p * h * w;
            for (std::int64_t oi = 0; oi < ho; ++oi)
                for (std::int64_t oj = 0; oj < wo; ++oj) {
                    T gv = g[oi * wo + oj];
                    for (std::int64_t ki = 0; ki < kh; ++ki) {
                        std::int64_t ii = detail::reflect_index(oi * stride + ki - ch, h);
                        for (std::int64_t kj = 0; kj < kw; ++kj) {
                            std::int64_t jj = detail::reflect_index(oj * stride + kj - cw, w);
                            dst[ii * w + jj] += static_cast<T>(
                                (*ker)[static_cast<std::size_t>(ki * kw + kj)] * static_cast<double>(gv));
                        }
                    }
                }
        }
    });
}

template <typename T>
TensorT<T> blurpool(const TensorT<T>& x, const PoolVariant& v) {
    return blurpool(x, v.blur_kernel, v.blur_kh, v.blur_kw, v.stride);
}

namespace detail {

// Index plumbing for the centered low-frequency block: small shifted index js
// maps to unshifted large index ((js - hs/2) mod H). When the reduced size is
// even, js == 0 is the reduced grid's Nyquist bin, which aliases two source
// bins; those are dropped (zeroed), which also keeps conjugate symmetry.
struct FlcAxisMap {
    std::vector<std::int64_t> large_index;  // per small shifted index; -1 = dropped
    std::vector<std::int64_t> small_index;  // unshifted small index per shifted position
};

inline FlcAxisMap flc_axis_map(std::int64_t big, std::int64_t small) {
    FlcAxisMap m;
    m.large_index.resize(static_cast<std::size_t>(small));
    m.small_index.resize(static_cast<std::size_t>(small));
    for (std::int64_t js = 0; js < small; ++js) {
        std::int64_t off = js - small / 2;
        m.small_index[static_cast<std::size_t>(js)] = ((off % small) + small) % small;
        if (small % 2 == 0 && js == 0)
            m.large_index[static_cast<std::size_t>(js)] = -1;
        else
            m.large_index[static_cast<std::size_t>(js)] = ((off % big) + big) % big;
    }
    return m;
}

// Reflect-101 pad of the two trailing dims (no-op when pads are zero).
template <typename T>
TensorT<T> reflect_pad2d(const TensorT<T>& x, std::int64_t ph, std::int64_t pw) {
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t hp = h + ph, wp = w + pw;
    std::vector<T> out(static_cast<std::size_t>(n * c * hp * wp));
    for (std::int64_t p = 0; p < n * c; ++p) {
        const T* src = x.values().data() + p * h * w;
        T* dst = out.data() + p * hp * wp;
        for (std::int64_t i = 0; i < hp; ++i) {
            std::int64_t ii = reflect_index(i, h);
            for (std::int64_t j = 0; j < wp; ++j) dst[i * wp + j] = src[ii * w + reflect_index(j, w)];
        }
    }
    auto xn = x.node();
    return TensorT<T>::make_op({n, c, hp, wp}, std::move(out), {x}, [xn, n, c, h, w, hp, wp](auto& nd) {
        for (std::int64_t p = 0; p < n * c; ++p) {
            const T* g = nd.grad.data() + p * hp * wp;
            T* dst = xn->grad.data() + p * h * w;
            for (std::int64_t i = 0; i < hp; ++i) {
                std::int64_t ii = reflect_index(i, h);
                for (std::int64_t j = 0; j < wp; ++j) dst[ii * w + reflect_index(j, w)] += g[i * wp + j];
            }
        }
    });
}

}  // namespace detail

// Padding applied by flcpool when H or W is not divisible by the stride.
struct FlcPadding {
    std::int64_t pad_h = 0;
    std::int64_t pad_w = 0;
};

// Frequency low-cut pooling: keep the centered (H/stride)x(W/stride) block of
// the spectrum, resynthesize at the reduced size, real part, scaled by
// 1/stride^2 so constants are preserved. Differentiable via the adjoint of
// the bin selection.
template <typename T>
TensorT<T> flcpool(const TensorT<T>& x, std::int64_t stride, FlcPadding* padding = nullptr) {
    if (x.shape().size() != 4) throw ShapeError("flcpool: expected [N,C,H,W]");
    if (stride <= 0) throw ShapeError("flcpool: stride must be positive");
    FlcPadding pad;
    pad.pad_h = (stride - x.dim(2) % stride) % stride;
    pad.pad_w = (stride - x.dim(3) % stride) % stride;
    if (padding) *padding = pad;
    TensorT<T> xp = (pad.pad_h || pad.pad_w) ? detail::reflect_pad2d(x, pad.pad_h, pad.pad_w) : x;

    const std::int64_t n = xp.dim(0), c = xp.dim(1), h = xp.dim(2), w = xp.dim(3);
    const std::int64_t hs = h / stride, ws = w / stride;
    const auto rmap = detail::flc_axis_map(h, hs);
    const auto cmap = detail::flc_axis_map(w, ws);
    const double inv_s2 = 1.0 / (static_cast<double>(stride) * static_cast<double>(stride));

    fft::Spectrum big = fft::fft2(xp);
    std::vector<fft::Complex> small(static_cast<std::size_t>(n * c * hs * ws), fft::Complex(0, 0));
    for (std::int64_t p = 0; p < n * c; ++p) {
        const fft::Complex* bp = big.values.data() + p * h * w;
        fft::Complex* sp = small.data() + p * hs * ws;
        for (std::int64_t js = 0; js < hs; ++js) {
            std::int64_t bi = rmap.large_index[static_cast<std::size_t>(js)];
            if (bi < 0) continue;
            std::int64_t si = rmap.small_index[static_cast<std::size_t>(js)];
            for (std::int64_t is = 0; is < ws; ++is) {
                std::int64_t bj = cmap.large_index[static_cast<std::size_t>(is)];
                if (bj < 0) continue;
                sp[si * ws + cmap.small_index[static_cast<std::size_t>(is)]] = bp[bi * w + bj];
            }
        }
    }
    fft::transform_2d(small.data(), n * c, hs, ws, true);

    std::vector<T> out(static_cast<std::size_t>(n * c * hs * ws));
    double max_im = 0.0, max_re = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        max_im = std::max(max_im, std::abs(small[i].imag()));
        max_re = std::max(max_re, std::abs(small[i].real()));
        out[i] = static_cast<T>(small[i].real() * inv_s2);
    }
    // Real input + symmetric bin selection => negligible imaginary residue.
    assert(max_im <= 1e-6 * std::max(max_re, 1e-30));
    (void)max_im; (void)max_re;

    auto xpn = xp.node();
    return TensorT<T>::make_op({n, c, hs, ws}, std::move(out), {xp},
                               [xpn, n, c, h, w, hs, ws, rmap, cmap, inv_s2](auto& nd) {
        // Adjoint: grad_x = (1/s^2) Re( FFT_big( scatter( IFFT_small(g) ) ) ).
        std::vector<fft::Complex> gs(static_cast<std::size_t>(n * c * hs * ws));
        for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = fft::Complex(static_cast<double>(nd.grad[i]), 0.0);
        fft::transform_2d(gs.data(), n * c, hs, ws, true);
        std::vector<fft::Complex> gb(static_cast<std::size_t>(n * c * h * w), fft::Complex(0, 0));
        for (std::int64_t p = 0; p < n * c; ++p) {
            const fft::Complex* sp = gs.data() + p * hs * ws;
            fft::Complex* bp = gb.data() + p * h * w;
            for (std::int64_t js = 0; js < hs; ++js) {
                std::int64_t bi = rmap.large_index[static_cast<std::size_t>(js)];
                if (bi < 0) continue;
                std::int64_t si = rmap.small_index[static_cast<std::size_t>(js)];
                for (std::int64_t is = 0; is < ws; ++is) {
                    std::int64_t bj = cmap.large_index[static_cast<std::size_t>(is)];
                    if (bj < 0) continue;
                    bp[bi * w + bj] = sp[si * ws + cmap.small_index[static_cast<std::size_t>(is)]];
                }
            }
        }
        fft::transform_2d(gb.data(), n * c, h, w, false);
        for (std::int64_t i = 0; i < n * c * h * w; ++i)
            xpn->grad[static_cast<std::size_t>(i)] += static_cast<T>(gb[static_cast<std::size_t>(i)].real() * inv_s2);
    });
}

// The strided baseline: plain subsampling of a stride-1 feature map.
template <typename T>
TensorT<T> strided_reduce(const TensorT<T>& x, std::int64_t stride) {
    return subsample2d(x, stride);
}

template <typename T>
TensorT<T> apply_pool(const TensorT<T>& x, const PoolVariant& v) {
    switch (v.kind) {
        case PoolKind::Strided: return strided_reduce(x, v.stride);
        case PoolKind::BlurPool: return blurpool(x, v);
        case PoolKind::FLCPool: return flcpool(x, v.stride);
    }
    throw ConfigError("unknown pool kind");
}

// Fraction of spectral power at radial frequency above half the Nyquist
// radius (|f| > 0.25 cycles/sample). Errors on an all-zero map.
double highfreq_energy(const std::vector<double>& map, std::int64_t h, std::int64_t w);

template <typename T>
double highfreq_energy(const TensorT<T>& map) {
    if (map.shape().size() != 2) throw ShapeError("highfreq_energy: expected [H,W]");
    std::vector<double> m(map.values().begin(), map.values().end());
    return highfreq_energy(m, map.dim(0), map.dim(1));
}

}  // namespace aabcos

#include "aabcos/fft.hpp"

#include <cmath>

namespace aabcos::fft {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative Cooley-Tukey, n a power of two. sign = -1 forward, +1 inverse
// (no scaling here).
void fft_pow2(Complex* a, std::size_t n, int sign) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * kPi / static_cast<double>(len);
        Complex wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                Complex u = a[i + j];
                Complex v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein chirp-z for arbitrary n, via a power-of-two circular convolution.
void fft_bluestein(Complex* a, std::size_t n, int sign) {
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // exp(sign * i * pi * k^2 / n); k^2 mod 2n keeps the angle exact.
        std::size_t k2 = (k * k) % (2 * n);
        double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = Complex(std::cos(ang), std::sin(ang));
    }
    std::vector<Complex> fa(m, Complex(0, 0)), fb(m, Complex(0, 0));
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    fft_pow2(fa.data(), m, -1);
    fft_pow2(fb.data(), m, -1);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_pow2(fa.data(), m, +1);
    double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * chirp[k];
}

void fft_any(Complex* a, std::size_t n, bool inverse) {
    if (n <= 1) return;
    int sign = inverse ? +1 : -1;
    if (is_pow2(n))
        fft_pow2(a, n, sign);
    else
        fft_bluestein(a, n, sign);
}

}  // namespace

void transform_1d(std::vector<Complex>& v, bool inverse) {
    fft_any(v.data(), v.size(), inverse);
    if (inverse && !v.empty()) {
        double s = 1.0 / static_cast<double>(v.size());
        for (auto& c : v) c *= s;
    }
}

void transform_2d(Complex* data, std::int64_t batch, std::int64_t h, std::int64_t w, bool inverse) {
    std::vector<Complex> col(static_cast<std::size_t>(h));
    for (std::int64_t b = 0; b < batch; ++b) {
        Complex* plane = data + b * h * w;
        for (std::int64_t i = 0; i < h; ++i) fft_any(plane + i * w, static_cast<std::size_t>(w), inverse);
        for (std::int64_t j = 0; j < w; ++j) {
            for (std::int64_t i = 0; i < h; ++i) col[static_cast<std::size_t>(i)] = plane[i * w + j];
            fft_any(col.data(), static_cast<std::size_t>(h), inverse);
            for (std::int64_t i = 0; i < h; ++i) plane[i * w + j] = col[static_cast<std::size_t>(i)];
        }
        if (inverse) {
            double s = 1.0 / static_cast<double>(h * w);
            for (std::int64_t i = 0; i < h * w; ++i) plane[i] *= s;
        }
    }
}

Spectrum ifft2(const Spectrum& s) {
    Spectrum out = s;
    transform_2d(out.values.data(), out.batch(), out.height(), out.width(), true);
    return out;
}

}  // namespace aabcos::fft

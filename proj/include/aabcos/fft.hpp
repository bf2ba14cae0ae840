#pragma once

#include <complex>
#include <vector>

#include "aabcos/tensor.hpp"

namespace aabcos::fft {

using Complex = std::complex<double>;

// 2D spectrum of a [..., H, W] tensor; leading dims are carried as a batch.
// Convention: forward transform is unscaled, inverse divides by H*W, so
// ifft2(fft2(x)) == x and Parseval reads sum|x|^2 == sum|X|^2 / (H*W).
struct Spectrum {
    Shape shape;                  // original tensor shape
    std::vector<Complex> values;  // row-major, same layout as the source

    std::int64_t height() const { return shape[shape.size() - 2]; }
    std::int64_t width() const { return shape[shape.size() - 1]; }
    std::int64_t batch() const { return shape_numel(shape) / (height() * width()); }
};

// In-place 1D transform; any length >= 1 (radix-2, Bluestein otherwise).
// Inverse divides by the length.
void transform_1d(std::vector<Complex>& v, bool inverse);

// In-place 2D transform over a batch of H x W planes.
void transform_2d(Complex* data, std::int64_t batch, std::int64_t h, std::int64_t w, bool inverse);

template <typename T>
Spectrum fft2(const TensorT<T>& x) {
    if (x.shape().size() < 2) throw ShapeError("fft2: tensor must have at least 2 dims");
    Spectrum s;
    s.shape = x.shape();
    s.values.resize(x.values().size());
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = Complex(static_cast<double>(x.values()[i]), 0.0);
    transform_2d(s.values.data(), s.batch(), s.height(), s.width(), false);
    return s;
}

Spectrum ifft2(const Spectrum& s);

// Inverse transform, real part only. If max_imag_ratio is given it receives
// |imag|_max / max(|real|_max, eps) for residue assertions.
template <typename T>
TensorT<T> ifft2_real(const Spectrum& s, double* max_imag_ratio = nullptr) {
    Spectrum inv = ifft2(s);
    std::vector<T> out(inv.values.size());
    double max_im = 0.0, max_re = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        max_im = std::max(max_im, std::abs(inv.values[i].imag()));
        max_re = std::max(max_re, std::abs(inv.values[i].real()));
        out[i] = static_cast<T>(inv.values[i].real());
    }
    if (max_imag_ratio) *max_imag_ratio = max_im / std::max(max_re, 1e-300);
    return TensorT<T>::from_data(s.shape, std::move(out));
}

}  // namespace aabcos::fft

#include <doctest.h>

#include "aabcos/fft.hpp"
#include "oracles.hpp"

using namespace aabcos;

TEST_CASE("fft2: constant image concentrates in the DC bin") {
    const double c = 2.5;
    Tensor64 x = Tensor64::filled({6, 8}, c);
    fft::Spectrum s = fft::fft2(x);
    CHECK(s.values[0].real() == doctest::Approx(c * 6 * 8));
    CHECK(s.values[0].imag() == doctest::Approx(0.0));
    for (std::size_t i = 1; i < s.values.size(); ++i) CHECK(std::abs(s.values[i]) < 1e-9);
}

TEST_CASE("fft2: unit impulse at the origin has a flat spectrum of ones") {
    Tensor64 x = Tensor64::zeros({4, 4});
    x.values()[0] = 1.0;
    fft::Spectrum s = fft::fft2(x);
    for (const auto& v : s.values) {
        CHECK(v.real() == doctest::Approx(1.0));
        CHECK(v.imag() == doctest::Approx(0.0));
    }
}

TEST_CASE("fft2/ifft2 round trip on random 8x8") {
    Rng rng(5);
    Tensor64 x = oracles::random_tensor<double>({8, 8}, rng);
    double imag_ratio = 0.0;
    Tensor64 back = fft::ifft2_real<double>(fft::fft2(x), &imag_ratio);
    for (std::size_t i = 0; i < x.values().size(); ++i)
        CHECK(std::abs(back.values()[i] - x.values()[i]) < 1e-6);
    CHECK(imag_ratio < 1e-9);
}

TEST_CASE("fft2 agrees with the quadratic DFT on non-power-of-two sizes") {
    Rng rng(6);
    for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{5, 6}, {7, 7}, {3, 12}, {1, 9}}) {
        Tensor64 x = oracles::random_tensor<double>({h, w}, rng);
        fft::Spectrum s = fft::fft2(x);
        std::vector<double> flat(x.values().begin(), x.values().end());
        auto ref = oracles::naive_dft2(flat, h, w);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(s.values[i] - ref[i]) < 1e-8);
        Tensor64 back = fft::ifft2_real<double>(s);
        for (std::size_t i = 0; i < flat.size(); ++i)
            CHECK(std::abs(back.values()[i] - flat[i]) < 1e-9);
    }
}

TEST_CASE("Parseval: forward unscaled, inverse divided by H*W") {
    Rng rng(8);
    Tensor64 x = oracles::random_tensor<double>({4, 6}, rng);
    fft::Spectrum s = fft::fft2(x);
    double spatial = 0.0, spectral = 0.0;
    for (double v : x.values()) spatial += v * v;
    for (const auto& v : s.values) spectral += std::norm(v);
    CHECK(spatial == doctest::Approx(spectral / (4.0 * 6.0)));
}

TEST_CASE("fft2 handles batched leading dimensions") {
    Rng rng(9);
    Tensor64 x = oracles::random_tensor<double>({2, 3, 4, 4}, rng);
    Tensor64 back = fft::ifft2_real<double>(fft::fft2(x));
    for (std::size_t i = 0; i < x.values().size(); ++i)
        CHECK(back.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-9));
}

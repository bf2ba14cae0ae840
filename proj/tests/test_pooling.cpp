#include <doctest.h>

#include <cmath>

#include "aabcos/pooling.hpp"
#include "oracles.hpp"

using namespace aabcos;

namespace {

const std::vector<double> kBinomial3 = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16,
                                        2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};

Tensor64 checkerboard(std::int64_t h, std::int64_t w) {
    std::vector<double> v(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) v[static_cast<std::size_t>(i * w + j)] = ((i + j) % 2) ? -1.0 : 1.0;
    return Tensor64::from_data({1, 1, h, w}, std::move(v));
}

// Direct reference: full-resolution blur with reflect-101 borders, then
// subsample.
std::vector<double> blur_then_subsample(const Tensor64& x, std::int64_t stride) {
    const std::int64_t h = x.dim(2), w = x.dim(3);
    auto reflect = [](std::int64_t i, std::int64_t n) {
        if (n == 1) return std::int64_t{0};
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };
    std::vector<double> blurred(static_cast<std::size_t>(h * w), 0.0);
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t ki = -1; ki <= 1; ++ki)
                for (std::int64_t kj = -1; kj <= 1; ++kj)
                    blurred[static_cast<std::size_t>(i * w + j)] +=
                        kBinomial3[static_cast<std::size_t>((ki + 1) * 3 + kj + 1)] *
                        x.values()[static_cast<std::size_t>(reflect(i + ki, h) * w + reflect(j + kj, w))];
    std::vector<double> out;
    for (std::int64_t i = 0; i < h; i += stride)
        for (std::int64_t j = 0; j < w; j += stride) out.push_back(blurred[static_cast<std::size_t>(i * w + j)]);
    return out;
}

}  // namespace

TEST_CASE("blurpool preserves constants at half resolution") {
    Tensor64 x = Tensor64::filled({1, 2, 8, 8}, 3.25);
    Tensor64 y = blurpool(x, kBinomial3, 3, 3, 2);
    CHECK(y.shape() == Shape{1, 2, 4, 4});
    for (double v : y.values()) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("blurpool of a unit impulse equals the subsampled blur kernel") {
    Tensor64 x = Tensor64::zeros({1, 1, 8, 8});
    x.values()[4 * 8 + 4] = 1.0;
    Tensor64 y = blurpool(x, kBinomial3, 3, 3, 2);
    auto ref = blur_then_subsample(x, 2);
    REQUIRE(y.values().size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]));
    CHECK(y.values()[2 * 4 + 2] == doctest::Approx(0.25));  // kernel center
}

TEST_CASE("blurpool annihilates the Nyquist checkerboard exactly") {
    Tensor64 y = blurpool(checkerboard(8, 8), kBinomial3, 3, 3, 2);
    for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("blurpool matches the direct blur+subsample reference on random input") {
    Rng rng(21);
    Tensor64 x = oracles::random_tensor<double>({1, 1, 9, 7}, rng);
    Tensor64 y = blurpool(x, kBinomial3, 3, 3, 2);
    auto ref = blur_then_subsample(x, 2);
    REQUIRE(y.values().size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]));
}

TEST_CASE("flcpool preserves constants") {
    Tensor64 x = Tensor64::filled({1, 1, 16, 16}, 0.7);
    Tensor64 y = flcpool(x, 2);
    CHECK(y.shape() == Shape{1, 1, 8, 8});
    for (double v : y.values()) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("flcpool removes super-Nyquist content") {
    // period-2 stripes sit at |f| = 0.5, far outside the retained block
    std::vector<double> v(16 * 16);
    for (std::int64_t i = 0; i < 16; ++i)
        for (std::int64_t j = 0; j < 16; ++j) v[static_cast<std::size_t>(i * 16 + j)] = (i % 2) ? -1.0 : 1.0;
    Tensor64 x = Tensor64::from_data({1, 1, 16, 16}, std::move(v));
    Tensor64 y = flcpool(x, 2);
    double ein = 0.0, eout = 0.0;
    for (double q : x.values()) ein += q * q;
    for (double q : y.values()) eout += q * q;
    CHECK(eout / ein < 1e-6);
}

TEST_CASE("flcpool keeps a sub-Nyquist sinusoid and resamples it") {
    std::vector<double> v(16 * 16);
    for (std::int64_t i = 0; i < 16; ++i)
        for (std::int64_t j = 0; j < 16; ++j)
            v[static_cast<std::size_t>(i * 16 + j)] = std::sin(2.0 * M_PI * static_cast<double>(j) / 8.0);
    Tensor64 x = Tensor64::from_data({1, 1, 16, 16}, std::move(v));
    Tensor64 y = flcpool(x, 2);
    double ref_norm = 0.0, err = 0.0;
    for (std::int64_t i = 0; i < 8; ++i)
        for (std::int64_t j = 0; j < 8; ++j) {
            double want = std::sin(2.0 * M_PI * static_cast<double>(2 * j) / 8.0);
            double got = y.values()[static_cast<std::size_t>(i * 8 + j)];
            err += (got - want) * (got - want);
            ref_norm += want * want;
        }
    CHECK(std::sqrt(err / ref_norm) < 1e-5);
}

TEST_CASE("flcpool pads indivisible sizes by reflection and reports it") {
    Tensor64 x = Tensor64::filled({1, 1, 15, 15}, 1.5);
    FlcPadding pad;
    Tensor64 y = flcpool(x, 2, &pad);
    CHECK(pad.pad_h == 1);
    CHECK(pad.pad_w == 1);
    CHECK(y.shape() == Shape{1, 1, 8, 8});
    for (double v : y.values()) CHECK(v == doctest::Approx(1.5));
}

TEST_CASE("strided_reduce picks rows and columns {0, s, 2s, ...}") {
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<double>(i);
    Tensor64 x = Tensor64::from_data({1, 1, 4, 4}, std::move(ramp));
    Tensor64 y = strided_reduce(x, 2);
    CHECK(y.values() == std::vector<double>{0.0, 2.0, 8.0, 10.0});
}

TEST_CASE("strided_reduce turns a checkerboard into a constant (aliasing)") {
    Tensor64 y = strided_reduce(checkerboard(8, 8), 2);
    for (double v : y.values()) CHECK(v == 1.0);
}

TEST_CASE("strided_reduce equals the index-slicing oracle") {
    Rng rng(31);
    Tensor64 x = oracles::random_tensor<double>({2, 3, 7, 5}, rng);
    Tensor64 y = strided_reduce(x, 2);
    const std::int64_t h = 7, w = 5, ho = 4, wo = 3;
    for (std::int64_t p = 0; p < 6; ++p)
        for (std::int64_t i = 0; i < ho; ++i)
            for (std::int64_t j = 0; j < wo; ++j)
                CHECK(y.values()[static_cast<std::size_t>((p * ho + i) * wo + j)] ==
                      x.values()[static_cast<std::size_t>((p * h + 2 * i) * w + 2 * j)]);
}

TEST_CASE("both anti-aliased pools are linear") {
    Rng rng(41);
    Tensor64 x = oracles::random_tensor<double>({1, 1, 8, 8}, rng);
    Tensor64 y = oracles::random_tensor<double>({1, 1, 8, 8}, rng);
    const double a = 1.7, b = -0.6;
    std::vector<double> mix(64);
    for (std::size_t i = 0; i < 64; ++i) mix[i] = a * x.values()[i] + b * y.values()[i];
    Tensor64 xy = Tensor64::from_data({1, 1, 8, 8}, std::move(mix));

    for (int variant = 0; variant < 2; ++variant) {
        auto pool = [&](const Tensor64& t) {
            return variant == 0 ? blurpool(t, kBinomial3, 3, 3, 2) : flcpool(t, 2);
        };
        Tensor64 lhs = pool(xy), px = pool(x), py = pool(y);
        for (std::size_t i = 0; i < lhs.values().size(); ++i)
            CHECK(std::abs(lhs.values()[i] - (a * px.values()[i] + b * py.values()[i])) < 1e-6);
    }
}

TEST_CASE("pooling gradients match finite differences") {
    Rng rng(51);
    Tensor64 x = oracles::random_tensor<double>({1, 2, 6, 6}, rng, -1.0, 1.0, true);
    CHECK(oracles::fd_max_rel_error({&x}, [&] { return sum_all(blurpool(x, kBinomial3, 3, 3, 2)); }) < 1e-3);
    CHECK(oracles::fd_max_rel_error({&x}, [&] { return sum_all(flcpool(x, 2)); }) < 1e-3);
    // weighted sum exercises off-diagonal adjoint terms
    Tensor64 wts = oracles::random_tensor<double>({1, 2, 3, 3}, rng);
    CHECK(oracles::fd_max_rel_error({&x}, [&] { return sum_all(mul(flcpool(x, 2), wts.detach())); }) < 1e-3);
}

namespace {

// Band-limited fractional shift along x (circular) via an FFT phase ramp: the
// aligned reference a 1-pixel input shift should produce at the pooled
// resolution.
Tensor64 frac_shift_x(const Tensor64& x, double shift) {
    const std::int64_t h = x.dim(2), w = x.dim(3);
    fft::Spectrum s = fft::fft2(x);
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
            double fx = static_cast<double>(j <= w / 2 ? j : j - w) / static_cast<double>(w);
            double ang = -2.0 * M_PI * fx * shift;
            s.values[static_cast<std::size_t>(i * w + j)] *= fft::Complex(std::cos(ang), std::sin(ang));
        }
    return fft::ifft2_real<double>(s);
}

}  // namespace

TEST_CASE("shift consistency: FLC <= BlurPool < Strided on 1/f inputs") {
    // A 1-pixel input shift should shift the pooled map by 1/stride pixels;
    // the L2 residual against that aligned reference measures how much the
    // feature map is corrupted by the shift (aliasing).
    Rng rng(61);
    const std::int64_t n = 16;
    double d_flc = 0.0, d_bp = 0.0, d_str = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
        // 1/f-amplitude noise via a random spectrum shaped radially.
        std::vector<fft::Complex> spec(static_cast<std::size_t>(n * n));
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                double fy = static_cast<double>(i <= n / 2 ? i : i - n) / static_cast<double>(n);
                double fx = static_cast<double>(j <= n / 2 ? j : j - n) / static_cast<double>(n);
                double amp = 1.0 / (0.05 + std::hypot(fx, fy));
                spec[static_cast<std::size_t>(i * n + j)] = fft::Complex(rng.normal(), rng.normal()) * amp;
            }
        fft::transform_2d(spec.data(), 1, n, n, true);
        std::vector<double> img(static_cast<std::size_t>(n * n));
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = spec[i].real();

        std::vector<double> rolled(img.size());
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                rolled[static_cast<std::size_t>(i * n + j)] =
                    img[static_cast<std::size_t>(i * n + (j + 1) % n)];

        Tensor64 x = Tensor64::from_data({1, 1, n, n}, img);
        Tensor64 xs = Tensor64::from_data({1, 1, n, n}, rolled);
        auto residual = [](const Tensor64& shifted_pool, const Tensor64& pool) {
            Tensor64 aligned = frac_shift_x(pool, -0.5);  // half-sample at stride 2
            double s = 0.0;
            for (std::size_t i = 0; i < aligned.values().size(); ++i) {
                double d = shifted_pool.values()[i] - aligned.values()[i];
                s += d * d;
            }
            return std::sqrt(s);
        };
        d_flc += residual(flcpool(xs, 2), flcpool(x, 2));
        d_bp += residual(blurpool(xs, kBinomial3, 3, 3, 2), blurpool(x, kBinomial3, 3, 3, 2));
        d_str += residual(strided_reduce(xs, 2), strided_reduce(x, 2));
    }
    CHECK(d_flc <= d_bp);
    CHECK(d_bp < d_str);
}

TEST_CASE("highfreq_energy on canonical maps") {
    CHECK(highfreq_energy(Tensor64::filled({8, 8}, 1.0)) == doctest::Approx(0.0));
    std::vector<double> cb(64);
    for (std::int64_t i = 0; i < 8; ++i)
        for (std::int64_t j = 0; j < 8; ++j) cb[static_cast<std::size_t>(i * 8 + j)] = ((i + j) % 2) ? -1.0 : 1.0;
    CHECK(highfreq_energy(cb, 8, 8) == doctest::Approx(1.0));

    const std::int64_t h = 32;
    std::vector<double> bump(static_cast<std::size_t>(h * h));
    double sigma = static_cast<double>(h) / 4.0;
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < h; ++j) {
            double dy = static_cast<double>(i) - h / 2.0, dx = static_cast<double>(j) - h / 2.0;
            bump[static_cast<std::size_t>(i * h + j)] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
        }
    CHECK(highfreq_energy(bump, h, h) < 0.05);

    CHECK_THROWS_AS(highfreq_energy(std::vector<double>(64, 0.0), 8, 8), DataError);
}

TEST_CASE("PoolVariant validation") {
    PoolVariant v;
    v.stride = 1;
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v.stride = 2;
    CHECK_NOTHROW(v.validate());
    v.kind = PoolKind::BlurPool;
    v.blur_kernel[0] = -0.1;
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v.blur_kernel[0] = 1.0 / 16;
    v.blur_kernel[1] = 0.5;
    CHECK_THROWS_AS(v.validate(), ConfigError);  // no longer sums to 1
}

#include "aabcos/pooling.hpp"

namespace aabcos {

double highfreq_energy(const std::vector<double>& map, std::int64_t h, std::int64_t w) {
    if (static_cast<std::int64_t>(map.size()) != h * w) throw ShapeError("highfreq_energy: size mismatch");
    bool all_zero = true;
    for (double v : map)
        if (v != 0.0) { all_zero = false; break; }
    if (all_zero) throw DataError("degenerate map");

    std::vector<fft::Complex> spec(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) spec[i] = fft::Complex(map[i], 0.0);
    fft::transform_2d(spec.data(), 1, h, w, false);

    double total = 0.0, high = 0.0;
    for (std::int64_t i = 0; i < h; ++i) {
        double fy = static_cast<double>(i <= h / 2 ? i : i - h) / static_cast<double>(h);
        for (std::int64_t j = 0; j < w; ++j) {
            double fx = static_cast<double>(j <= w / 2 ? j : j - w) / static_cast<double>(w);
            double p = std::norm(spec[static_cast<std::size_t>(i * w + j)]);
            total += p;
            if (std::sqrt(fx * fx + fy * fy) > 0.25) high += p;
        }
    }
    return total > 0.0 ? high / total : 0.0;
}

}  // namespace aabcos

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aabcos {

// 8-bit grayscale image in [0,1] after load; values clamped+rounded on save.
struct GrayImage {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<float> pixels;  // row-major, [0,1]
};

void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

// Minimal PNG writer (8-bit RGB, zlib-deflated, deterministic output).
void write_png_rgb(const std::string& path, std::int64_t width, std::int64_t height,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace aabcos

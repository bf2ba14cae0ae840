#include "aabcos/explain.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aabcos {

void write_epmap(const ContributionMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write map '" + path + "'");
    char head[128];
    std::snprintf(head, sizeof head, "EPMAP v1 %lld %lld %d %.17g\n",
                  static_cast<long long>(map.height), static_cast<long long>(map.width),
                  map.class_id, map.logit);
    out << head;
    out.write(reinterpret_cast<const char*>(map.values.data()),
              static_cast<std::streamsize>(map.values.size() * sizeof(float)));
    if (!out) throw DataError("failed writing map '" + path + "'");
}

ContributionMap read_epmap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read map '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("map '" + path + "': empty file");
    std::istringstream hs(line);
    std::string magic, version;
    ContributionMap m;
    long long h = 0, w = 0;
    if (!(hs >> magic >> version >> h >> w >> m.class_id >> m.logit) || magic != "EPMAP" || version != "v1")
        throw DataError("map '" + path + "': bad header '" + line + "'");
    if (h <= 0 || w <= 0) throw DataError("map '" + path + "': bad dimensions");
    m.height = h;
    m.width = w;
    m.values.resize(static_cast<std::size_t>(h * w));
    in.read(reinterpret_cast<char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(float)));
    if (!in) throw DataError("map '" + path + "': truncated values");
    return m;
}

std::vector<std::uint8_t> heatmap_rgb(const ContributionMap& map) {
    float peak = 0.0f;
    for (float v : map.values) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0f) peak = 1.0f;
    std::vector<std::uint8_t> rgb(map.values.size() * 3, 0);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        float v = map.values[i] / peak;
        if (v >= 0.0f)
            rgb[i * 3 + 0] = static_cast<std::uint8_t>(std::lround(255.0f * v));
        else
            rgb[i * 3 + 2] = static_cast<std::uint8_t>(std::lround(255.0f * -v));
    }
    return rgb;
}

void render_heatmap(const ContributionMap& map, const std::string& base_path) {
    write_png_rgb(base_path + ".png", map.width, map.height, heatmap_rgb(map));
    write_epmap(map, base_path + ".epmap");
}

}  // namespace aabcos

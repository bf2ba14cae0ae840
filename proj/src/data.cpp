#include "aabcos/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace aabcos {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

struct Blob {
    double cx, cy;     // center
    double a, b;       // semi-axes (a = major)
    double theta;      // orientation
    double amplitude;
    bool ring;         // hollow (annular) interior instead of a filled disk
};

// Axis-aligned half extents of a rotated ellipse.
void ellipse_extents(const Blob& e, double& ex, double& ey) {
    double c = std::cos(e.theta), s = std::sin(e.theta);
    ex = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
    ey = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
}

void paint_blob(GrayImage& img, const Blob& e) {
    double ex, ey;
    ellipse_extents(e, ex, ey);
    std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.cx - ex)));
    std::int64_t x1 = std::min<std::int64_t>(img.width - 1, static_cast<std::int64_t>(std::ceil(e.cx + ex)));
    std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.cy - ey)));
    std::int64_t y1 = std::min<std::int64_t>(img.height - 1, static_cast<std::int64_t>(std::ceil(e.cy + ey)));
    double c = std::cos(e.theta), s = std::sin(e.theta);
    for (std::int64_t y = y0; y <= y1; ++y)
        for (std::int64_t x = x0; x <= x1; ++x) {
            double dx = static_cast<double>(x) - e.cx, dy = static_cast<double>(y) - e.cy;
            double u = (dx * c + dy * s) / e.a;
            double v = (-dx * s + dy * c) / e.b;
            double d2 = u * u + v * v;
            if (d2 >= 1.0) continue;
            double r = std::sqrt(d2);
            double profile = e.ring ? std::max(0.0, 1.0 - std::abs(r - 0.7) / 0.3)
                                    : std::pow(1.0 - d2, 1.2);
            float& px = img.pixels[static_cast<std::size_t>(y * img.width + x)];
            px = std::min(1.0f, px + static_cast<float>(e.amplitude * profile));
        }
}

BoundingBox blob_box(const Blob& e, std::int64_t h, std::int64_t w, int class_id) {
    double ex, ey;
    ellipse_extents(e, ex, ey);
    BoundingBox b;
    b.class_id = class_id;
    std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.cx - ex)));
    std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.cy - ey)));
    std::int64_t x1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::ceil(e.cx + ex)));
    std::int64_t y1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::ceil(e.cy + ey)));
    b.x = x0;
    b.y = y0;
    b.w = x1 - x0 + 1;
    b.h = y1 - y0 + 1;
    return b;
}

std::string labels_field(const std::vector<std::uint8_t>& labels) {
    std::string s;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) {
            if (!s.empty()) s += ';';
            s += std::to_string(k);
        }
    return s;
}

std::string boxes_field(const std::vector<BoundingBox>& boxes) {
    std::string s;
    for (const auto& b : boxes) {
        if (!s.empty()) s += ';';
        s += std::to_string(b.class_id) + ':' + std::to_string(b.x) + ':' + std::to_string(b.y) + ':' +
             std::to_string(b.w) + ':' + std::to_string(b.h);
    }
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

Manifest generate_synthetic(const GenConfig& cfg, const fs::path& out_dir) {
    if (cfg.image_size < 32) throw DataError("generate_synthetic: image_size must be >= 32");
    if (cfg.k_classes < 1) throw DataError("generate_synthetic: k_classes must be >= 1");
    if (cfg.n < 1) throw DataError("generate_synthetic: n must be >= 1");

    double rmin = cfg.blob_min_radius > 0 ? cfg.blob_min_radius : static_cast<double>(cfg.image_size) / 8.0;
    double rmax = cfg.blob_max_radius > 0 ? cfg.blob_max_radius : static_cast<double>(cfg.image_size) / 5.0;
    if (2.0 * rmax >= static_cast<double>(cfg.image_size))
        throw DataError("generate_synthetic: blob larger than image");

    fs::create_directories(out_dir / "images");
    Manifest m;
    m.root = out_dir;
    m.num_classes = cfg.k_classes;
    m.image_size = cfg.image_size;

    const std::int64_t size = cfg.image_size;
    for (std::int64_t i = 0; i < cfg.n; ++i) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        GrayImage img;
        img.height = img.width = size;
        img.pixels.resize(static_cast<std::size_t>(size * size));
        for (auto& p : img.pixels)
            p = static_cast<float>(std::clamp(rng.normal(cfg.background_mean, cfg.background_std), 0.0, 1.0));

        Sample s;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "s%06lld", static_cast<long long>(i));
        s.id = idbuf;
        s.path = "images/" + s.id + ".pgm";
        s.labels.assign(static_cast<std::size_t>(cfg.k_classes), 0);

        for (int k = 0; k < static_cast<int>(cfg.k_classes); ++k) {
            if (rng.uniform() >= cfg.prevalence) continue;
            s.labels[static_cast<std::size_t>(k)] = 1;
            // Class identity is structural: odd classes are rings, even ones
            // filled disks, with eccentricity growing along the class index.
            double ecc = cfg.k_classes > 1
                             ? 0.15 + 0.6 * static_cast<double>(k) / static_cast<double>(cfg.k_classes - 1)
                             : 0.3;
            int blobs = 1 + static_cast<int>(rng.uniform_index(2));
            for (int bi = 0; bi < blobs; ++bi) {
                Blob e;
                e.a = rng.uniform(rmin, rmax);
                e.b = e.a * std::sqrt(std::max(0.05, 1.0 - ecc * ecc));
                e.theta = rng.uniform(0.0, kPi);
                double ex, ey;
                ellipse_extents(e, ex, ey);
                e.cx = rng.uniform(ex + 1.0, static_cast<double>(size) - 2.0 - ex);
                e.cy = rng.uniform(ey + 1.0, static_cast<double>(size) - 2.0 - ey);
                e.amplitude = rng.uniform(0.6, 0.9);
                e.ring = (k % 2 == 1);
                paint_blob(img, e);
                s.boxes.push_back(blob_box(e, size, size, k));
            }
        }
        write_pgm((out_dir / s.path).string(), img);
        m.samples.push_back(std::move(s));
    }

    write_manifest(m, out_dir / "manifest.csv");
    std::ofstream meta(out_dir / "dataset.meta");
    meta << "seed=" << cfg.seed << "\n"
         << "n=" << cfg.n << "\n"
         << "image_size=" << cfg.image_size << "\n"
         << "k_classes=" << cfg.k_classes << "\n"
         << "prevalence=" << cfg.prevalence << "\n";
    if (!meta) throw DataError("failed writing dataset.meta");
    return m;
}

void write_manifest(const Manifest& m, const fs::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write manifest '" + csv_path.string() + "'");
    out << "id,path,labels,boxes,fold\n";
    for (const auto& s : m.samples)
        out << s.id << ',' << s.path << ',' << labels_field(s.labels) << ',' << boxes_field(s.boxes)
            << ',' << s.fold << '\n';
    if (!out) throw DataError("failed writing manifest '" + csv_path.string() + "'");
}

Manifest load_manifest(const fs::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot read manifest '" + csv_path.string() + "'");
    Manifest m;
    m.root = csv_path.parent_path();

    // dataset.meta (if present) pins num_classes and image size.
    std::ifstream meta(m.root / "dataset.meta");
    if (meta) {
        std::string line;
        while (std::getline(meta, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq), val = line.substr(eq + 1);
            if (key == "k_classes") m.num_classes = std::stoll(val);
            if (key == "image_size") m.image_size = std::stoll(val);
        }
    }

    std::string line;
    std::int64_t lineno = 0;
    std::int64_t max_class = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("id,", 0) == 0) continue;  // header
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 5)
            throw DataError("manifest '" + csv_path.string() + "' line " + std::to_string(lineno) +
                            ": expected 5 fields, got " + std::to_string(fields.size()));
        Sample s;
        s.id = fields[0];
        s.path = fields[1];
        std::vector<std::int64_t> present;
        if (!fields[2].empty())
            for (const auto& tok : split(fields[2], ';')) {
                try {
                    present.push_back(std::stoll(tok));
                } catch (const std::exception&) {
                    throw DataError("manifest '" + csv_path.string() + "' line " + std::to_string(lineno) +
                                    ": bad label '" + tok + "'");
                }
            }
        for (std::int64_t c : present) max_class = std::max(max_class, c);
        if (!fields[3].empty())
            for (const auto& tok : split(fields[3], ';')) {
                auto parts = split(tok, ':');
                if (parts.size() != 5)
                    throw DataError("manifest '" + csv_path.string() + "' line " + std::to_string(lineno) +
                                    ": bad box '" + tok + "'");
                BoundingBox b;
                try {
                    b.class_id = std::stoi(parts[0]);
                    b.x = std::stoll(parts[1]);
                    b.y = std::stoll(parts[2]);
                    b.w = std::stoll(parts[3]);
                    b.h = std::stoll(parts[4]);
                } catch (const std::exception&) {
                    throw DataError("manifest '" + csv_path.string() + "' line " + std::to_string(lineno) +
                                    ": bad box '" + tok + "'");
                }
                max_class = std::max<std::int64_t>(max_class, b.class_id);
                s.boxes.push_back(b);
            }
        try {
            s.fold = std::stoi(fields[4]);
        } catch (const std::exception&) {
            throw DataError("manifest '" + csv_path.string() + "' line " + std::to_string(lineno) +
                            ": bad fold '" + fields[4] + "'");
        }
        // stash present-class list; expanded to a binary vector below
        s.labels.assign(present.begin(), present.end());
        m.samples.push_back(std::move(s));
    }

    if (m.num_classes == 0) m.num_classes = max_class + 1;
    for (auto& s : m.samples) {
        std::vector<std::uint8_t> lab(static_cast<std::size_t>(std::max<std::int64_t>(m.num_classes, 1)), 0);
        for (std::uint8_t c : s.labels) {
            if (c >= lab.size()) throw DataError("manifest sample '" + s.id + "': class id out of range");
            lab[c] = 1;
        }
        s.labels = std::move(lab);
        for (const auto& b : s.boxes)
            if (b.class_id < 0 || b.class_id >= static_cast<int>(m.num_classes) ||
                !s.labels[static_cast<std::size_t>(b.class_id)])
                throw DataError("manifest sample '" + s.id + "': box class " + std::to_string(b.class_id) +
                                " has no positive label");
    }
    return m;
}

GrayImage load_sample_image(const Manifest& m, const Sample& s) {
    return read_pgm((m.root / s.path).string());
}

void AugmentConfig::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (v < 0.0) throw ConfigError(std::string("augment: ") + name + " must be non-negative");
    };
    nonneg(translate_px, "translate_px");
    nonneg(scale_sigma, "scale_sigma");
    nonneg(rotate_deg, "rotate_deg");
    nonneg(shear_deg, "shear_deg");
    nonneg(perspective, "perspective");
    nonneg(gamma_sigma, "gamma_sigma");
    nonneg(heavy_scale_sigma, "heavy_scale_sigma");
    nonneg(heavy_gamma_sigma, "heavy_gamma_sigma");
    nonneg(blur_sigma, "blur_sigma");
    nonneg(noise_sigma, "noise_sigma");
    nonneg(saltpepper_density, "saltpepper_density");
    for (double p : {perspective_prob, blur_prob, noise_prob, saltpepper_prob})
        if (p < 0.0 || p > 1.0) throw ConfigError("augment: probabilities must lie in [0,1]");
}

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 translation(double tx, double ty) {
    Mat3 m = Mat3::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return m;
}

// Homography mapping 4 source corners onto 4 destination corners.
Mat3 solve_homography(const double src[4][2], const double dst[4][2]) {
    Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
        a.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    Eigen::Matrix<double, 8, 1> hv = a.fullPivLu().solve(b);
    Mat3 m;
    m << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), 1.0;
    return m;
}

void apply_point(const Mat3& m, double x, double y, double& ox, double& oy) {
    double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
    ox = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w;
    oy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w;
}

float bilinear_sample(const GrayImage& img, double x, double y) {
    if (x <= -1.0 || y <= -1.0 || x >= static_cast<double>(img.width) || y >= static_cast<double>(img.height))
        return 0.0f;
    std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
    std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
    double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
    auto at = [&](std::int64_t yy, std::int64_t xx) -> double {
        if (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) return 0.0;
        return static_cast<double>(img.pixels[static_cast<std::size_t>(yy * img.width + xx)]);
    };
    double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
               fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    return static_cast<float>(v);
}

}  // namespace

SpatialDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng, double scale_sigma, double gamma_sigma,
                              std::int64_t height, std::int64_t width) {
    SpatialDraw d;
    // Draw order is part of the reproducibility contract.
    d.tx = cfg.translate_px > 0 ? rng.uniform(-cfg.translate_px, cfg.translate_px) : 0.0;
    d.ty = cfg.translate_px > 0 ? rng.uniform(-cfg.translate_px, cfg.translate_px) : 0.0;
    d.scale = 1.0 / std::pow(2.0, rng.normal(0.0, scale_sigma));
    d.angle_rad = cfg.rotate_deg > 0 ? rng.uniform(-cfg.rotate_deg, cfg.rotate_deg) * kPi / 180.0 : 0.0;
    d.shear = cfg.shear_deg > 0 ? std::tan(rng.uniform(-cfg.shear_deg, cfg.shear_deg) * kPi / 180.0) : 0.0;
    d.perspective = rng.uniform() < cfg.perspective_prob && cfg.perspective > 0.0;
    if (d.perspective) {
        const double w = static_cast<double>(width), h = static_cast<double>(height);
        const double corners[4][2] = {{0, 0}, {w - 1, 0}, {w - 1, h - 1}, {0, h - 1}};
        for (int i = 0; i < 4; ++i) {
            d.corners[i][0] = corners[i][0] + rng.uniform(-1.0, 1.0) * cfg.perspective * w / 4.0;
            d.corners[i][1] = corners[i][1] + rng.uniform(-1.0, 1.0) * cfg.perspective * h / 4.0;
        }
    }
    d.gamma = std::pow(2.0, rng.normal(0.0, gamma_sigma));
    return d;
}

AugmentResult apply_augmentation(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                                 const SpatialDraw& d) {
    const double h = static_cast<double>(image.height), w = static_cast<double>(image.width);
    const double cx = (w - 1.0) / 2.0, cy = (h - 1.0) / 2.0;

    Mat3 lin = Mat3::Identity();
    lin(0, 0) = d.scale;
    lin(1, 1) = d.scale;
    Mat3 rot = Mat3::Identity();
    rot(0, 0) = std::cos(d.angle_rad); rot(0, 1) = -std::sin(d.angle_rad);
    rot(1, 0) = std::sin(d.angle_rad); rot(1, 1) = std::cos(d.angle_rad);
    Mat3 sh = Mat3::Identity();
    sh(0, 1) = d.shear;

    Mat3 fwd = translation(cx, cy) * sh * rot * lin * translation(-cx, -cy) * translation(d.tx, d.ty);

    if (d.perspective) {
        const double corners[4][2] = {{0, 0}, {w - 1, 0}, {w - 1, h - 1}, {0, h - 1}};
        fwd = solve_homography(corners, d.corners) * fwd;
    }

    double gamma = d.gamma;

    AugmentResult res;
    res.image.height = image.height;
    res.image.width = image.width;
    res.image.pixels.resize(image.pixels.size());

    if (fwd.isIdentity(0.0)) {
        res.image.pixels = image.pixels;
    } else {
        Mat3 inv = fwd.inverse();
        for (std::int64_t y = 0; y < image.height; ++y)
            for (std::int64_t x = 0; x < image.width; ++x) {
                double sxp, syp;
                apply_point(inv, static_cast<double>(x), static_cast<double>(y), sxp, syp);
                res.image.pixels[static_cast<std::size_t>(y * image.width + x)] =
                    bilinear_sample(image, sxp, syp);
            }
    }

    if (gamma != 1.0)
        for (auto& p : res.image.pixels)
            p = static_cast<float>(std::pow(std::clamp(static_cast<double>(p), 0.0, 1.0), gamma));
    for (auto& p : res.image.pixels) p = std::clamp(p, 0.0f, 1.0f);

    for (const auto& b : boxes) {
        const double pts[4][2] = {
            {static_cast<double>(b.x), static_cast<double>(b.y)},
            {static_cast<double>(b.x + b.w - 1), static_cast<double>(b.y)},
            {static_cast<double>(b.x + b.w - 1), static_cast<double>(b.y + b.h - 1)},
            {static_cast<double>(b.x), static_cast<double>(b.y + b.h - 1)}};
        double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
        for (const auto& p : pts) {
            double ox, oy;
            apply_point(fwd, p[0], p[1], ox, oy);
            x0 = std::min(x0, ox); y0 = std::min(y0, oy);
            x1 = std::max(x1, ox); y1 = std::max(y1, oy);
        }
        BoundingBox nb;
        nb.class_id = b.class_id;
        std::int64_t ix0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(x0)));
        std::int64_t iy0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(y0)));
        std::int64_t ix1 = std::min<std::int64_t>(image.width - 1, static_cast<std::int64_t>(std::ceil(x1)));
        std::int64_t iy1 = std::min<std::int64_t>(image.height - 1, static_cast<std::int64_t>(std::ceil(y1)));
        if (ix1 < ix0 || iy1 < iy0) {
            res.box_dropped = true;
            continue;
        }
        nb.x = ix0;
        nb.y = iy0;
        nb.w = ix1 - ix0 + 1;
        nb.h = iy1 - iy0 + 1;
        res.boxes.push_back(nb);
    }
    return res;
}

namespace {

void gaussian_blur_inplace(GrayImage& img, double sigma) {
    if (sigma <= 0.0) return;
    int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;
    auto reflect = [](std::int64_t i, std::int64_t n) {
        if (n == 1) return std::int64_t{0};
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };
    GrayImage tmp = img;
    for (std::int64_t y = 0; y < img.height; ++y)
        for (std::int64_t x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] *
                       static_cast<double>(img.pixels[static_cast<std::size_t>(y * img.width + reflect(x + i, img.width))]);
            tmp.pixels[static_cast<std::size_t>(y * img.width + x)] = static_cast<float>(acc);
        }
    for (std::int64_t y = 0; y < img.height; ++y)
        for (std::int64_t x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] *
                       static_cast<double>(tmp.pixels[static_cast<std::size_t>(reflect(y + i, img.height) * img.width + x)]);
            img.pixels[static_cast<std::size_t>(y * img.width + x)] = static_cast<float>(acc);
        }
}

}  // namespace

AugmentResult augment_light(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                            const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    return apply_augmentation(image, boxes,
                              draw_augmentation(cfg, rng, cfg.scale_sigma, cfg.gamma_sigma,
                                                image.height, image.width));
}

AugmentResult augment_heavy(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                            const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    AugmentResult res = apply_augmentation(image, boxes,
                                           draw_augmentation(cfg, rng, cfg.heavy_scale_sigma,
                                                             cfg.heavy_gamma_sigma, image.height,
                                                             image.width));
    if (rng.uniform() < cfg.blur_prob) gaussian_blur_inplace(res.image, cfg.blur_sigma);
    if (rng.uniform() < cfg.noise_prob)
        for (auto& p : res.image.pixels)
            p = static_cast<float>(std::clamp(static_cast<double>(p) + rng.normal(0.0, cfg.noise_sigma), 0.0, 1.0));
    if (rng.uniform() < cfg.saltpepper_prob)
        for (auto& p : res.image.pixels)
            if (rng.uniform() < cfg.saltpepper_density) p = rng.uniform() < 0.5 ? 0.0f : 1.0f;
    return res;
}

Manifest oversample(const Manifest& m, int class_id, std::uint64_t seed) {
    if (class_id < 0 || class_id >= static_cast<int>(m.num_classes))
        throw DataError("oversample: invalid class id");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < m.samples.size(); ++i)
        (m.samples[i].labels[static_cast<std::size_t>(class_id)] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw DataError("oversample: a class side is empty");

    Manifest out = m;
    auto& minority = pos.size() < neg.size() ? pos : neg;
    std::int64_t deficit = static_cast<std::int64_t>(std::max(pos.size(), neg.size()) -
                                                     std::min(pos.size(), neg.size()));
    Rng rng(mix_seed(seed, 0x0ec4));
    std::vector<std::size_t> order = minority;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::int64_t d = 0; d < deficit; ++d) {
        Sample dup = m.samples[order[static_cast<std::size_t>(d) % order.size()]];
        dup.id += "+dup" + std::to_string(d);
        out.samples.push_back(std::move(dup));
    }
    return out;
}

Manifest oversample_rarest(const Manifest& m, std::uint64_t seed, int* chosen_class) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(m.num_classes), 0);
    for (const auto& s : m.samples)
        for (std::size_t k = 0; k < s.labels.size(); ++k)
            if (s.labels[k]) ++counts[k];
    int best = -1;
    for (int k = 0; k < static_cast<int>(m.num_classes); ++k)
        if (counts[static_cast<std::size_t>(k)] > 0 &&
            (best < 0 || counts[static_cast<std::size_t>(k)] < counts[static_cast<std::size_t>(best)]))
            best = k;
    if (best < 0) throw DataError("oversample: no positive class present");
    if (chosen_class) *chosen_class = best;
    return oversample(m, best, seed);
}

std::vector<int> kfold_split(Manifest& m, int k, std::uint64_t seed) {
    if (k < 1) throw DataError("kfold_split: k must be >= 1");
    if (static_cast<std::int64_t>(m.samples.size()) < k)
        throw DataError("kfold_split: fewer samples than folds");

    // Exact-label-vector strata, dealt through a single rotating fold pointer
    // so total fold sizes differ by at most one.
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        std::string key(m.samples[i].labels.begin(), m.samples[i].labels.end());
        for (auto& c : key) c += '0';
        strata[key].push_back(i);
    }
    std::vector<int> folds(m.samples.size(), 0);
    std::size_t ptr = 0, stratum_idx = 0;
    for (auto& [key, idxs] : strata) {
        Rng rng(mix_seed(seed, stratum_idx++));
        for (std::size_t i = idxs.size(); i > 1; --i)
            std::swap(idxs[i - 1], idxs[rng.uniform_index(i)]);
        for (std::size_t idx : idxs) folds[idx] = static_cast<int>(ptr++ % static_cast<std::size_t>(k));
    }
    for (std::size_t i = 0; i < folds.size(); ++i) m.samples[i].fold = folds[i];
    return folds;
}

}  // namespace aabcos

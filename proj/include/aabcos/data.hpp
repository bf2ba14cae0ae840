#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aabcos/common.hpp"
#include "aabcos/image_io.hpp"
#include "aabcos/metrics.hpp"

namespace aabcos {

struct Sample {
    std::string id;
    std::string path;                 // image file, relative to manifest root
    std::vector<std::uint8_t> labels; // binary, length num_classes
    std::vector<BoundingBox> boxes;
    int fold = -1;
};

struct Manifest {
    std::filesystem::path root;
    std::int64_t num_classes = 0;
    std::int64_t image_size = 0;
    std::vector<Sample> samples;
};

struct GenConfig {
    std::int64_t n = 100;
    std::int64_t image_size = 32;
    std::int64_t k_classes = 2;
    std::uint64_t seed = 0;
    double prevalence = 0.3;          // per-class positive rate
    double background_mean = 0.15;
    double background_std = 0.06;
    double blob_min_radius = 0.0;     // 0 = derive from image size
    double blob_max_radius = 0.0;
};

// Synthetic stand-in dataset: noise background, 1-2 bright elliptical blobs
// per positive class (class-specific eccentricity and texture), boxes are the
// blob bounding rectangles. Writes images/, manifest.csv and dataset.meta
// under out_dir and returns the manifest.
Manifest generate_synthetic(const GenConfig& cfg, const std::filesystem::path& out_dir);

void write_manifest(const Manifest& m, const std::filesystem::path& csv_path);
Manifest load_manifest(const std::filesystem::path& csv_path);

GrayImage load_sample_image(const Manifest& m, const Sample& s);

struct AugmentConfig {
    double translate_px = 32.0;
    double scale_sigma = 0.1;      // s = 1/2^eps, eps ~ N(0, scale_sigma^2)
    double rotate_deg = 5.0;       // uniform in [-rotate_deg, rotate_deg]
    double shear_deg = 2.5;
    double perspective = 0.1;
    double perspective_prob = 0.5;
    double gamma_sigma = 0.20;     // x^(2^eps), eps ~ N(0, gamma_sigma^2)
    // heavy additions
    double heavy_scale_sigma = 0.15;
    double heavy_gamma_sigma = 0.30;
    double blur_prob = 0.3;
    double blur_sigma = 1.0;
    double noise_prob = 0.3;
    double noise_sigma = 0.05;
    double saltpepper_prob = 0.3;
    double saltpepper_density = 0.01;

    void validate() const;
};

struct AugmentResult {
    GrayImage image;
    std::vector<BoundingBox> boxes;
    bool box_dropped = false;  // a box degenerated to zero area and was removed
};

// One sampled spatial transform (the random part of an augmentation), split
// from its application so a given geometry can be replayed or constructed.
struct SpatialDraw {
    double tx = 0.0, ty = 0.0;
    double scale = 1.0;
    double angle_rad = 0.0;
    double shear = 0.0;  // tan of the shear angle
    bool perspective = false;
    double corners[4][2] = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};  // displaced corners
    double gamma = 1.0;
};

SpatialDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng, double scale_sigma, double gamma_sigma,
                              std::int64_t height, std::int64_t width);
AugmentResult apply_augmentation(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                                 const SpatialDraw& draw);

// translation -> gaussian scale -> rotation -> shear -> perspective (gated)
// -> gamma. Boxes follow the same map and are re-clipped. Output stays in
// [0,1]; bilinear interpolation, zero fill outside the source.
AugmentResult augment_light(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                            const AugmentConfig& cfg, Rng& rng);

// Light pipeline at the heavy sigmas plus gated gaussian blur, additive
// gaussian noise and salt-and-pepper noise.
AugmentResult augment_heavy(const GrayImage& image, const std::vector<BoundingBox>& boxes,
                            const AugmentConfig& cfg, Rng& rng);

// Duplicates the minority side of `class_id` (round-robin over a seeded
// shuffle) until positive and negative counts are equal. Duplicate ids get a
// unique suffix.
Manifest oversample(const Manifest& m, int class_id, std::uint64_t seed);

// Multi-label convenience: balances the rarest positive class.
Manifest oversample_rarest(const Manifest& m, std::uint64_t seed, int* chosen_class = nullptr);

// Stratified (by exact label vector) fold assignment; fold sizes differ by at
// most one; deterministic under seed. Returns the assignment and stores it in
// the manifest.
std::vector<int> kfold_split(Manifest& m, int k, std::uint64_t seed);

}  // namespace aabcos

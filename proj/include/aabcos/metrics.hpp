#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aabcos/common.hpp"

namespace aabcos {

struct BoundingBox {
    std::int64_t x = 0, y = 0;  // top-left pixel
    std::int64_t w = 0, h = 0;  // positive extents
    int class_id = 0;

    void validate(std::int64_t image_h, std::int64_t image_w) const {
        if (w <= 0 || h <= 0) throw DataError("bounding box has non-positive extent");
        if (x < 0 || y < 0 || x + w > image_w || y + h > image_h)
            throw DataError("bounding box exceeds image bounds");
    }
};

// Union mask of the boxes; overlapping boxes count once.
std::vector<std::uint8_t> box_mask(std::int64_t h, std::int64_t w, const std::vector<BoundingBox>& boxes);

// Energy-based pointing game scores on a signed H x W map. nullopt means the
// score is undefined for this input (no boxes, no surviving mass, zero
// denominator); callers skip and count such samples.
std::optional<double> epg_general(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                  const std::vector<BoundingBox>& boxes);
// Negatives zeroed; positives kept only where strictly > t * max positive.
std::optional<double> epg_precision(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                    const std::vector<BoundingBox>& boxes, double t);
// Positive share inside the box against |negative| inside the box; positives
// thresholded as in epg_precision, negatives untouched.
std::optional<double> epg_recall(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                 const std::vector<BoundingBox>& boxes, double t);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;  // missing when labels are single-class
};

// Confusion-matrix metrics at the given decision threshold (score >= threshold
// predicts positive); AUC via the Mann-Whitney rank statistic, ties averaged.
ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels, double threshold = 0.5);

struct EpgConfig {
    std::vector<double> thresholds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    void validate() const {
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (thresholds[i] < 0.0 || thresholds[i] > 1.0)
                throw ConfigError("EPG thresholds must lie in [0,1]");
            if (i > 0 && thresholds[i] <= thresholds[i - 1])
                throw ConfigError("EPG thresholds must be sorted and unique");
        }
        if (thresholds.empty()) throw ConfigError("EPG thresholds must be non-empty");
    }
};

// One evaluated (sample, class) pair: map, that class's boxes, and whether the
// model predicted the class positive (TP) or negative (FN).
struct EpgSample {
    std::string sample_id;
    int class_id = 0;
    std::vector<float> map;
    std::int64_t height = 0, width = 0;
    std::vector<BoundingBox> boxes;
    bool predicted_positive = false;
};

struct EpgRecord {
    std::string sample_id;
    int class_id = 0;
    double threshold = 0.0;
    std::optional<double> general, precision, recall;
    bool predicted_positive = false;
};

struct EpgAggregate {
    std::string metric;   // epg_general | epg_precision | epg_recall
    double threshold = 0.0;
    std::string subset;   // all | tp | fn
    double mean = 0.0;
    double stddev = 0.0;  // population std over defined samples
    std::int64_t n = 0;
};

struct EpgReport {
    std::vector<EpgRecord> records;
    std::vector<EpgAggregate> aggregates;
    std::int64_t skipped_missing_boxes = 0;
    std::int64_t undefined_values = 0;

    void write_records_csv(const std::string& path) const;
    void write_aggregates_csv(const std::string& path) const;
};

std::vector<EpgAggregate> aggregate_epg_records(const std::vector<EpgRecord>& records,
                                                const EpgConfig& cfg);

EpgReport epg_evaluate(const std::vector<EpgSample>& samples, const EpgConfig& cfg);

}  // namespace aabcos

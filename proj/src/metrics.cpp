#include "aabcos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace aabcos {

std::vector<std::uint8_t> box_mask(std::int64_t h, std::int64_t w, const std::vector<BoundingBox>& boxes) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h * w), 0);
    for (const auto& b : boxes) {
        b.validate(h, w);
        for (std::int64_t i = b.y; i < b.y + b.h; ++i)
            std::fill(mask.begin() + i * w + b.x, mask.begin() + i * w + b.x + b.w, std::uint8_t{1});
    }
    return mask;
}

std::optional<double> epg_general(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                  const std::vector<BoundingBox>& boxes) {
    if (static_cast<std::int64_t>(map.size()) != h * w) throw ShapeError("epg_general: map size mismatch");
    if (boxes.empty()) return std::nullopt;
    auto mask = box_mask(h, w, boxes);
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i)
        (mask[i] ? in : out) += static_cast<double>(map[i]);
    double denom = in + out;
    if (denom == 0.0) return std::nullopt;
    return in / denom;
}

namespace {

// Positives above the strict threshold t * max(L_p); everything else zero.
double positive_cutoff(const std::vector<float>& map, double t, bool& any_positive) {
    double mx = 0.0;
    any_positive = false;
    for (float v : map)
        if (v > 0.0f) {
            any_positive = true;
            mx = std::max(mx, static_cast<double>(v));
        }
    return t * mx;
}

}  // namespace

std::optional<double> epg_precision(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                    const std::vector<BoundingBox>& boxes, double t) {
    if (static_cast<std::int64_t>(map.size()) != h * w) throw ShapeError("epg_precision: map size mismatch");
    if (boxes.empty()) return std::nullopt;
    bool any_positive = false;
    double cut = positive_cutoff(map, t, any_positive);
    if (!any_positive) return std::nullopt;
    auto mask = box_mask(h, w, boxes);
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        double v = static_cast<double>(map[i]);
        if (v > 0.0 && v > cut) (mask[i] ? in : out) += v;
    }
    double denom = in + out;
    if (denom == 0.0) return std::nullopt;  // nothing survives the threshold
    return in / denom;
}

std::optional<double> epg_recall(const std::vector<float>& map, std::int64_t h, std::int64_t w,
                                 const std::vector<BoundingBox>& boxes, double t) {
    if (static_cast<std::int64_t>(map.size()) != h * w) throw ShapeError("epg_recall: map size mismatch");
    if (boxes.empty()) return std::nullopt;
    bool any_positive = false;
    double cut = positive_cutoff(map, t, any_positive);
    auto mask = box_mask(h, w, boxes);
    double pos_in = 0.0, neg_in = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!mask[i]) continue;
        double v = static_cast<double>(map[i]);
        if (v > 0.0) {
            if (any_positive && v > cut) pos_in += v;
        } else if (v < 0.0) {
            neg_in += -v;
        }
    }
    double denom = pos_in + neg_in;
    if (denom == 0.0) return std::nullopt;  // box carries no mass
    return pos_in / denom;
}

ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size()) throw ShapeError("classification_metrics: length mismatch");
    if (scores.empty()) throw ShapeError("classification_metrics: empty input");
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool pos = labels[i] != 0;
        if (pred && pos) ++tp;
        else if (pred && !pos) ++fp;
        else if (!pred && pos) ++fn;
        else ++tn;
    }
    ClassificationMetrics m;
    double n = static_cast<double>(scores.size());
    m.accuracy = static_cast<double>(tp + tn) / n;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;

    std::int64_t npos = tp + fn, nneg = fp + tn;
    if (npos == 0 || nneg == 0) return m;  // AUC undefined for single-class labels

    // Mann-Whitney with averaged tie ranks.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (labels[k] != 0) rank_sum_pos += rank[k];
    double u = rank_sum_pos - static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
    m.auc = u / (static_cast<double>(npos) * static_cast<double>(nneg));
    return m;
}

namespace {

struct Stats {
    double mean = 0.0, stddev = 0.0;
    std::int64_t n = 0;
};

Stats stats_of(const std::vector<double>& xs) {
    Stats s;
    s.n = static_cast<std::int64_t>(xs.size());
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::vector<EpgAggregate> aggregate_epg_records(const std::vector<EpgRecord>& records,
                                                const EpgConfig& cfg) {
    std::vector<EpgAggregate> out;
    const char* metric_names[3] = {"epg_general", "epg_precision", "epg_recall"};
    const char* subsets[3] = {"all", "tp", "fn"};
    for (int mi = 0; mi < 3; ++mi) {
        for (double t : cfg.thresholds) {
            for (int si = 0; si < 3; ++si) {
                std::vector<double> xs;
                for (const auto& r : records) {
                    if (r.threshold != t) continue;
                    if (si == 1 && !r.predicted_positive) continue;
                    if (si == 2 && r.predicted_positive) continue;
                    const auto& v = mi == 0 ? r.general : mi == 1 ? r.precision : r.recall;
                    if (v) xs.push_back(*v);
                }
                Stats s = stats_of(xs);
                out.push_back({metric_names[mi], t, subsets[si], s.mean, s.stddev, s.n});
            }
        }
    }
    return out;
}

EpgReport epg_evaluate(const std::vector<EpgSample>& samples, const EpgConfig& cfg) {
    cfg.validate();
    EpgReport report;
    for (const auto& s : samples) {
        if (s.boxes.empty()) {
            ++report.skipped_missing_boxes;
            continue;
        }
        for (double t : cfg.thresholds) {
            EpgRecord r;
            r.sample_id = s.sample_id;
            r.class_id = s.class_id;
            r.threshold = t;
            r.predicted_positive = s.predicted_positive;
            r.general = epg_general(s.map, s.height, s.width, s.boxes);
            r.precision = epg_precision(s.map, s.height, s.width, s.boxes, t);
            r.recall = epg_recall(s.map, s.height, s.width, s.boxes, t);
            if (!r.general) ++report.undefined_values;
            if (!r.precision) ++report.undefined_values;
            if (!r.recall) ++report.undefined_values;
            report.records.push_back(std::move(r));
        }
    }
    report.aggregates = aggregate_epg_records(report.records, cfg);
    return report;
}

void EpgReport::write_records_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "sample_id,class_id,subset,threshold,epg_general,epg_precision,epg_recall,defined\n";
    for (const auto& r : records) {
        for (int pass = 0; pass < 2; ++pass) {
            const char* subset = pass == 0 ? "all" : (r.predicted_positive ? "tp" : "fn");
            bool defined = r.general && r.precision && r.recall;
            out << r.sample_id << ',' << r.class_id << ',' << subset << ',' << fmt(r.threshold) << ','
                << fmt_opt(r.general) << ',' << fmt_opt(r.precision) << ',' << fmt_opt(r.recall) << ','
                << (defined ? 1 : 0) << '\n';
        }
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

void EpgReport::write_aggregates_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "metric,threshold,subset,mean,std,n\n";
    for (const auto& a : aggregates)
        out << a.metric << ',' << fmt(a.threshold) << ',' << a.subset << ',' << fmt(a.mean) << ','
            << fmt(a.stddev) << ',' << a.n << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace aabcos

#include "aabcos/experiment.hpp"

#include <algorithm>
#include <cmath>

namespace aabcos {

std::vector<std::size_t> fold_indices(const Manifest& manifest, int fold, bool in_fold) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
        if ((manifest.samples[i].fold == fold) == in_fold) idx.push_back(i);
    return idx;
}

std::vector<EpgSample> collect_epg_samples(const BcosModel& model, const Manifest& manifest,
                                           const std::vector<std::size_t>& indices) {
    const std::int64_t k = model.config().num_classes;
    std::vector<std::vector<EpgSample>> slots(indices.size());
    parallel_for(static_cast<std::int64_t>(indices.size()), [&](std::int64_t si) {
        const Sample& s = manifest.samples[indices[static_cast<std::size_t>(si)]];
        GrayImage img = load_sample_image(manifest, s);
        Tensor image = Tensor::from_data({1, 1, img.height, img.width},
                                         std::vector<float>(img.pixels.begin(), img.pixels.end()));
        std::vector<ContributionMap> maps = contribution_maps_all(model, image);

        // prediction per class from the same forward values
        std::vector<bool> predicted(static_cast<std::size_t>(k), false);
        if (model.config().mode == ClassMode::MultiLabel) {
            for (std::int64_t c = 0; c < k; ++c)
                predicted[static_cast<std::size_t>(c)] = maps[static_cast<std::size_t>(c)].logit >= 0.0;
        } else {
            std::int64_t best = 0;
            for (std::int64_t c = 1; c < k; ++c)
                if (maps[static_cast<std::size_t>(c)].logit > maps[static_cast<std::size_t>(best)].logit)
                    best = c;
            predicted[static_cast<std::size_t>(best)] = true;
        }

        for (std::int64_t c = 0; c < k; ++c) {
            if (!s.labels[static_cast<std::size_t>(c)]) continue;
            EpgSample es;
            es.sample_id = s.id;
            es.class_id = static_cast<int>(c);
            es.map = maps[static_cast<std::size_t>(c)].values;
            es.height = img.height;
            es.width = img.width;
            for (const auto& b : s.boxes)
                if (b.class_id == static_cast<int>(c)) es.boxes.push_back(b);
            es.predicted_positive = predicted[static_cast<std::size_t>(c)];
            slots[static_cast<std::size_t>(si)].push_back(std::move(es));
        }
    });
    std::vector<EpgSample> out;
    for (auto& chunk : slots)
        for (auto& es : chunk) out.push_back(std::move(es));
    return out;
}

std::vector<double> map_highfreq_per_sample(const BcosModel& model, const Manifest& manifest,
                                            const std::vector<std::size_t>& indices) {
    std::vector<double> out(indices.size(), 0.0);
    parallel_for(static_cast<std::int64_t>(indices.size()), [&](std::int64_t si) {
        const Sample& s = manifest.samples[indices[static_cast<std::size_t>(si)]];
        GrayImage img = load_sample_image(manifest, s);
        Tensor image = Tensor::from_data({1, 1, img.height, img.width},
                                         std::vector<float>(img.pixels.begin(), img.pixels.end()));
        std::vector<ContributionMap> maps = contribution_maps_all(model, image);
        double acc = 0.0;
        int counted = 0;
        for (const auto& m : maps) {
            std::vector<double> vals(m.values.begin(), m.values.end());
            bool all_zero = true;
            for (double v : vals)
                if (v != 0.0) { all_zero = false; break; }
            if (all_zero) continue;
            acc += highfreq_energy(vals, m.height, m.width);
            ++counted;
        }
        out[static_cast<std::size_t>(si)] = counted ? acc / counted : 0.0;
    });
    return out;
}

double mean_box_coverage(const std::vector<EpgSample>& samples) {
    double acc = 0.0;
    std::int64_t n = 0;
    for (const auto& s : samples) {
        if (s.boxes.empty()) continue;
        auto mask = box_mask(s.height, s.width, s.boxes);
        std::int64_t in = 0;
        for (auto m : mask) in += m;
        acc += static_cast<double>(in) / static_cast<double>(s.height * s.width);
        ++n;
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

VariantOutcome run_variant_experiment(const RunConfig& rc, PoolKind kind, const Manifest& manifest,
                                      int val_fold) {
    RunConfig local = rc;
    local.model.pool.kind = kind;
    VariantOutcome out;
    out.kind = kind;
    out.train_result = train(local.model, manifest, val_fold, local.train);

    std::vector<std::size_t> val = fold_indices(manifest, val_fold, true);
    std::vector<EpgSample> es = collect_epg_samples(out.train_result.model, manifest, val);
    out.box_coverage = mean_box_coverage(es);
    out.epg = epg_evaluate(es, local.epg);
    out.highfreq_per_image = map_highfreq_per_sample(out.train_result.model, manifest, val);
    double acc = 0.0;
    for (double v : out.highfreq_per_image) acc += v;
    out.mean_highfreq = out.highfreq_per_image.empty()
                            ? 0.0
                            : acc / static_cast<double>(out.highfreq_per_image.size());
    return out;
}

const EpgAggregate& find_aggregate(const EpgReport& report, const std::string& metric, double threshold,
                                   const std::string& subset) {
    for (const auto& a : report.aggregates)
        if (a.metric == metric && a.subset == subset && std::abs(a.threshold - threshold) < 1e-12) return a;
    throw DataError("aggregate not found: " + metric + " t=" + std::to_string(threshold) + " " + subset);
}

}  // namespace aabcos

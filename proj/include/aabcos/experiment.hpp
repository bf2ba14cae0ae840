#pragma once

#include "aabcos/config.hpp"
#include "aabcos/explain.hpp"
#include "aabcos/training.hpp"

namespace aabcos {

// Per-(sample, class) EPG inputs for every ground-truth-positive class of the
// given samples: contribution map, that class's boxes, TP/FN flag from the
// model prediction (threshold 0.5 on sigmoid scores, argmax for multi-class).
std::vector<EpgSample> collect_epg_samples(const BcosModel& model, const Manifest& manifest,
                                           const std::vector<std::size_t>& indices);

// Mean spectral high-frequency fraction of each sample's contribution maps
// (averaged over classes). One value per index.
std::vector<double> map_highfreq_per_sample(const BcosModel& model, const Manifest& manifest,
                                            const std::vector<std::size_t>& indices);

std::vector<std::size_t> fold_indices(const Manifest& manifest, int fold, bool in_fold);

// Mean box-mask coverage over the given (sample, class) pairs.
double mean_box_coverage(const std::vector<EpgSample>& samples);

struct VariantOutcome {
    PoolKind kind = PoolKind::FLCPool;
    TrainResult train_result;
    EpgReport epg;                          // on the validation fold
    std::vector<double> highfreq_per_image; // per validation image
    double mean_highfreq = 0.0;
    double box_coverage = 0.0;              // mean over evaluated pairs
};

// Trains one pooling variant on the config (fold held out), then evaluates
// EPG and map spectra on the validation fold.
VariantOutcome run_variant_experiment(const RunConfig& rc, PoolKind kind, const Manifest& manifest,
                                      int val_fold);

// Looks up the subset/threshold aggregate; throws if absent.
const EpgAggregate& find_aggregate(const EpgReport& report, const std::string& metric, double threshold,
                                   const std::string& subset);

}  // namespace aabcos

#pragma once

#include <string>
#include <vector>

#include "aabcos/data.hpp"
#include "aabcos/layers.hpp"
#include "aabcos/metrics.hpp"

namespace aabcos {

enum class LossKind { CrossEntropy, BinaryCrossEntropy };
enum class AugmentKind { None, Light, Heavy };

inline std::string loss_kind_name(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "binary_cross_entropy";
}
inline LossKind loss_kind_from(const std::string& s) {
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    if (s == "binary_cross_entropy") return LossKind::BinaryCrossEntropy;
    throw ConfigError("unknown loss '" + s + "'");
}
inline std::string augment_kind_name(AugmentKind k) {
    return k == AugmentKind::None ? "none" : k == AugmentKind::Light ? "light" : "heavy";
}
inline AugmentKind augment_kind_from(const std::string& s) {
    if (s == "none") return AugmentKind::None;
    if (s == "light") return AugmentKind::Light;
    if (s == "heavy") return AugmentKind::Heavy;
    throw ConfigError("unknown augment mode '" + s + "'");
}

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-5;
    double weight_decay = 1e-3;
    int scheduler_patience = 3;
    double scheduler_factor = 0.1;
    LossKind loss = LossKind::BinaryCrossEntropy;
    std::uint64_t seed = 0;
    AugmentKind augment = AugmentKind::None;
    AugmentConfig aug;
    bool oversample_train = false;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

    void validate(ClassMode mode) const {
        if (epochs <= 0 || batch_size <= 0) throw ConfigError("epochs and batch_size must be positive");
        if (lr < 0.0 || weight_decay < 0.0) throw ConfigError("lr and weight_decay must be non-negative");
        if (scheduler_patience <= 0) throw ConfigError("scheduler_patience must be positive");
        if (scheduler_factor <= 0.0 || scheduler_factor >= 1.0)
            throw ConfigError("scheduler_factor must lie in (0,1)");
        if ((loss == LossKind::CrossEntropy) != (mode == ClassMode::MultiClass))
            throw ConfigError("loss must match the model classification mode");
        aug.validate();
    }
};

// Adam with decoupled weight decay; with zero gradient a step shrinks weights
// by exactly (1 - lr * wd).
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, wd_, b1_, b2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Reduce-on-plateau over a higher-is-better metric: after `patience`
// consecutive non-improving observations the multiplier shrinks by `factor`.
class PlateauScheduler {
public:
    PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}

    // Returns true when the learning rate was reduced at this observation.
    bool observe(double metric) {
        if (metric > best_) {
            best_ = metric;
            bad_ = 0;
            return false;
        }
        if (++bad_ >= patience_) {
            bad_ = 0;
            scale_ *= factor_;
            return true;
        }
        return false;
    }

    double scale() const { return scale_; }

private:
    double factor_;
    int patience_;
    double best_ = -1e300;
    int bad_ = 0;
    double scale_ = 1.0;
};

struct EpochLog {
    int epoch = 0;
    std::string split;  // train | val
    double loss = 0.0;
    ClassificationMetrics metrics;
    double lr = 0.0;
};

struct TrainResult {
    BcosModel model;
    std::vector<EpochLog> log;
    ClassificationMetrics final_val;

    void write_log_csv(const std::string& path) const;
};

// Scores (sigmoid or softmax probability per class) and flattened binary
// labels for a set of manifest samples.
struct EvalScores {
    std::vector<std::vector<double>> scores;  // [n][num_classes]
    std::vector<double> flat_scores;          // (sample, class) pairs, row-major
    std::vector<int> flat_labels;
    double mean_loss = 0.0;
};

EvalScores evaluate_scores(const BcosModel& model, const Manifest& manifest,
                           const std::vector<std::size_t>& indices, LossKind loss, int batch_size = 16);

// Trains on every fold except val_fold; validates on val_fold. Deterministic
// under cfg.seed. Throws NumericError when the loss goes non-finite.
TrainResult train(const ModelConfig& mc, const Manifest& manifest, int val_fold, const TrainConfig& cfg);

struct FoldMetrics {
    int fold = 0;
    ClassificationMetrics metrics;
};

struct CrossValidationResult {
    std::vector<FoldMetrics> folds;
    ClassificationMetrics mean;
    ClassificationMetrics stddev;

    void write_csv(const std::string& path) const;
};

CrossValidationResult cross_validate(const ModelConfig& mc, const Manifest& manifest,
                                     const TrainConfig& cfg, int k = 5);

}  // namespace aabcos

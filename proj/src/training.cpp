#include "aabcos/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace aabcos {

void AdamW::step(const std::vector<Tensor*>& params) {
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->values().size(), 0.0);
            v_.emplace_back(p->values().size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        const auto& g = p.grad();
        auto& w = p.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
            m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
            v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
            double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            // decay applied multiplicatively: a zero-gradient step shrinks the
            // weight by exactly (1 - lr*wd)
            w[i] = static_cast<float>(static_cast<double>(w[i]) * (1.0 - lr_ * wd_) - lr_ * update);
        }
    }
}

namespace {

Tensor batch_tensor(const std::vector<const GrayImage*>& images) {
    const std::int64_t n = static_cast<std::int64_t>(images.size());
    const std::int64_t h = images[0]->height, w = images[0]->width;
    std::vector<float> data(static_cast<std::size_t>(n * h * w));
    for (std::int64_t b = 0; b < n; ++b)
        std::copy(images[static_cast<std::size_t>(b)]->pixels.begin(),
                  images[static_cast<std::size_t>(b)]->pixels.end(), data.begin() + b * h * w);
    return Tensor::from_data({n, 1, h, w}, std::move(data));
}

Tensor forward_batch(const BcosModel& model, const Tensor& images, bool frozen) {
    Tensor input = model.config().input_encoding ? encode_input(images) : images;
    return model.forward(input, frozen);
}

std::int64_t single_label_index(const Sample& s) {
    std::int64_t idx = -1;
    for (std::size_t k = 0; k < s.labels.size(); ++k)
        if (s.labels[k]) {
            if (idx >= 0) throw DataError("sample '" + s.id + "': multi-class mode needs exactly one label");
            idx = static_cast<std::int64_t>(k);
        }
    if (idx < 0) throw DataError("sample '" + s.id + "': multi-class mode needs exactly one label");
    return idx;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

namespace {

// Appends per-class scores of one logits row.
void push_scores(const float* row, std::int64_t k, LossKind loss, std::vector<double>& out) {
    if (loss == LossKind::BinaryCrossEntropy) {
        for (std::int64_t c = 0; c < k; ++c) out.push_back(sigmoid(row[c]));
    } else {
        double zmax = row[0];
        for (std::int64_t c = 1; c < k; ++c) zmax = std::max<double>(zmax, row[c]);
        double denom = 0.0;
        for (std::int64_t c = 0; c < k; ++c) denom += std::exp(row[c] - zmax);
        for (std::int64_t c = 0; c < k; ++c) out.push_back(std::exp(row[c] - zmax) / denom);
    }
}

EvalScores eval_images(const BcosModel& model, const std::vector<const GrayImage*>& images,
                       const std::vector<const Sample*>& samples, LossKind loss, int batch_size) {
    EvalScores ev;
    const std::int64_t k = model.config().num_classes;
    double loss_sum = 0.0;
    std::int64_t loss_batches = 0;
    for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const GrayImage*> ptrs(images.begin() + start, images.begin() + end);
        Tensor logits = forward_batch(model, batch_tensor(ptrs), /*frozen=*/true);

        if (loss == LossKind::BinaryCrossEntropy) {
            std::vector<float> targets;
            for (std::size_t i = start; i < end; ++i)
                for (std::int64_t c = 0; c < k; ++c)
                    targets.push_back(static_cast<float>(samples[i]->labels[static_cast<std::size_t>(c)]));
            loss_sum += static_cast<double>(bce_with_logits(logits, targets).item());
        } else {
            std::vector<std::int64_t> targets;
            for (std::size_t i = start; i < end; ++i) targets.push_back(single_label_index(*samples[i]));
            loss_sum += static_cast<double>(softmax_cross_entropy(logits, targets).item());
        }
        ++loss_batches;

        for (std::size_t i = start; i < end; ++i) {
            const float* row = logits.values().data() + (i - start) * static_cast<std::size_t>(k);
            std::vector<double> sc;
            push_scores(row, k, loss, sc);
            for (std::int64_t c = 0; c < k; ++c) {
                ev.flat_scores.push_back(sc[static_cast<std::size_t>(c)]);
                ev.flat_labels.push_back(samples[i]->labels[static_cast<std::size_t>(c)] ? 1 : 0);
            }
            ev.scores.push_back(std::move(sc));
        }
    }
    ev.mean_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    return ev;
}

}  // namespace

EvalScores evaluate_scores(const BcosModel& model, const Manifest& manifest,
                           const std::vector<std::size_t>& indices, LossKind loss, int batch_size) {
    std::vector<GrayImage> imgs;
    imgs.reserve(indices.size());
    for (std::size_t i : indices) imgs.push_back(load_sample_image(manifest, manifest.samples[i]));
    std::vector<const GrayImage*> ptrs;
    std::vector<const Sample*> samples;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        ptrs.push_back(&imgs[j]);
        samples.push_back(&manifest.samples[indices[j]]);
    }
    return eval_images(model, ptrs, samples, loss, batch_size);
}

TrainResult train(const ModelConfig& mc, const Manifest& manifest, int val_fold, const TrainConfig& cfg) {
    mc.validate();
    cfg.validate(mc.mode);
    if (manifest.samples.empty()) throw DataError("train: empty manifest");

    std::vector<std::size_t> val_idx;
    Manifest train_set;
    train_set.root = manifest.root;
    train_set.num_classes = manifest.num_classes;
    train_set.image_size = manifest.image_size;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        if (manifest.samples[i].fold == val_fold)
            val_idx.push_back(i);
        else
            train_set.samples.push_back(manifest.samples[i]);
    }
    if (train_set.samples.empty()) throw DataError("train: no training samples outside fold " + std::to_string(val_fold));
    if (cfg.oversample_train) train_set = oversample_rarest(train_set, cfg.seed);

    std::vector<std::size_t> train_idx(train_set.samples.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);

    // Images are small; keep them resident.
    std::vector<GrayImage> cache(train_set.samples.size());
    for (std::size_t i = 0; i < train_set.samples.size(); ++i)
        cache[i] = load_sample_image(train_set, train_set.samples[i]);
    std::vector<GrayImage> val_cache(val_idx.size());
    std::vector<const GrayImage*> val_ptrs(val_idx.size());
    std::vector<const Sample*> val_samples(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
        val_cache[i] = load_sample_image(manifest, manifest.samples[val_idx[i]]);
        val_ptrs[i] = &val_cache[i];
        val_samples[i] = &manifest.samples[val_idx[i]];
    }

    TrainResult result;
    result.model = BcosModel(mc);
    Rng init_rng(mix_seed(cfg.seed, 0xbe11));
    result.model.init_weights(init_rng);

    AdamW opt(cfg.lr, cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    PlateauScheduler sched(cfg.scheduler_factor, cfg.scheduler_patience);
    const std::int64_t k = mc.num_classes;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0x5011 + static_cast<std::uint64_t>(epoch)));
        std::vector<std::size_t> order = train_idx;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        std::int64_t batches = 0;
        std::vector<double> train_scores;
        std::vector<int> train_labels;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<GrayImage> augmented;
            std::vector<const GrayImage*> ptrs;
            std::vector<float> bce_targets;
            std::vector<std::int64_t> ce_targets;
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = train_set.samples[order[i]];
                if (cfg.augment == AugmentKind::None) {
                    ptrs.push_back(&cache[order[i]]);
                } else {
                    Rng arng(mix_seed(cfg.seed, 0xa000 + static_cast<std::uint64_t>(epoch) * 1000003u +
                                                    static_cast<std::uint64_t>(order[i])));
                    AugmentResult ar = cfg.augment == AugmentKind::Light
                                           ? augment_light(cache[order[i]], s.boxes, cfg.aug, arng)
                                           : augment_heavy(cache[order[i]], s.boxes, cfg.aug, arng);
                    augmented.push_back(std::move(ar.image));
                    ptrs.push_back(nullptr);  // fixed up below
                }
                if (cfg.loss == LossKind::BinaryCrossEntropy)
                    for (std::int64_t c = 0; c < k; ++c)
                        bce_targets.push_back(static_cast<float>(s.labels[static_cast<std::size_t>(c)]));
                else
                    ce_targets.push_back(single_label_index(s));
            }
            // Late fix-up: vector reallocation would invalidate earlier pointers.
            if (cfg.augment != AugmentKind::None) {
                std::size_t ai = 0;
                for (auto& p : ptrs) p = &augmented[ai++];
            }

            Tensor logits = forward_batch(result.model, batch_tensor(ptrs), /*frozen=*/false);
            Tensor loss = cfg.loss == LossKind::BinaryCrossEntropy
                              ? bce_with_logits(logits, bce_targets)
                              : softmax_cross_entropy(logits, ce_targets);
            double lv = static_cast<double>(loss.item());
            if (!std::isfinite(lv))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches));
            epoch_loss += lv;
            ++batches;

            // Running train metrics from the batch logits (augmented views).
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = train_set.samples[order[i]];
                const float* row = logits.values().data() + (i - start) * static_cast<std::size_t>(k);
                std::vector<double> sc;
                push_scores(row, k, cfg.loss, sc);
                for (std::int64_t c = 0; c < k; ++c) {
                    train_scores.push_back(sc[static_cast<std::size_t>(c)]);
                    train_labels.push_back(s.labels[static_cast<std::size_t>(c)] ? 1 : 0);
                }
            }

            for (Tensor* p : result.model.parameters()) p->zero_grad();
            loss.backward();
            opt.step(result.model.parameters());
        }

        ClassificationMetrics tm = classification_metrics(train_scores, train_labels);
        result.log.push_back({epoch, "train", batches ? epoch_loss / static_cast<double>(batches) : 0.0, tm,
                              opt.lr()});

        if (!val_idx.empty()) {
            EvalScores va = eval_images(result.model, val_ptrs, val_samples, cfg.loss, cfg.batch_size);
            ClassificationMetrics vm = classification_metrics(va.flat_scores, va.flat_labels);
            result.log.push_back({epoch, "val", va.mean_loss, vm, opt.lr()});
            result.final_val = vm;
            if (sched.observe(vm.f1)) opt.set_lr(cfg.lr * sched.scale());
        }
    }
    return result;
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

void TrainResult::write_log_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "epoch,split,loss,accuracy,precision,recall,f1,auc,lr\n";
    for (const auto& row : log)
        out << row.epoch << ',' << row.split << ',' << fmt(row.loss) << ',' << fmt(row.metrics.accuracy)
            << ',' << fmt(row.metrics.precision) << ',' << fmt(row.metrics.recall) << ','
            << fmt(row.metrics.f1) << ',' << fmt_opt(row.metrics.auc) << ',' << fmt(row.lr) << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

CrossValidationResult cross_validate(const ModelConfig& mc, const Manifest& manifest,
                                     const TrainConfig& cfg, int k) {
    CrossValidationResult cv;
    for (int fold = 0; fold < k; ++fold) {
        TrainResult r = train(mc, manifest, fold, cfg);
        cv.folds.push_back({fold, r.final_val});
    }
    auto collect = [&](auto getter) {
        std::vector<double> xs;
        for (const auto& f : cv.folds) {
            auto v = getter(f.metrics);
            if (v) xs.push_back(*v);
        }
        return xs;
    };
    auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
        mean = sd = 0.0;
        if (xs.empty()) return;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        for (double x : xs) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(xs.size()));
    };
    auto opt_of = [](double v) { return std::optional<double>(v); };
    double m, s;
    mean_std(collect([&](const ClassificationMetrics& x) { return opt_of(x.accuracy); }), m, s);
    cv.mean.accuracy = m; cv.stddev.accuracy = s;
    mean_std(collect([&](const ClassificationMetrics& x) { return opt_of(x.precision); }), m, s);
    cv.mean.precision = m; cv.stddev.precision = s;
    mean_std(collect([&](const ClassificationMetrics& x) { return opt_of(x.recall); }), m, s);
    cv.mean.recall = m; cv.stddev.recall = s;
    mean_std(collect([&](const ClassificationMetrics& x) { return opt_of(x.f1); }), m, s);
    cv.mean.f1 = m; cv.stddev.f1 = s;
    auto aucs = collect([](const ClassificationMetrics& x) { return x.auc; });
    if (!aucs.empty()) {
        mean_std(aucs, m, s);
        cv.mean.auc = m;
        cv.stddev.auc = s;
    }
    return cv;
}

void CrossValidationResult::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "fold,accuracy,precision,recall,f1,auc\n";
    for (const auto& f : folds)
        out << f.fold << ',' << fmt(f.metrics.accuracy) << ',' << fmt(f.metrics.precision) << ','
            << fmt(f.metrics.recall) << ',' << fmt(f.metrics.f1) << ',' << fmt_opt(f.metrics.auc) << '\n';
    out << "mean," << fmt(mean.accuracy) << ',' << fmt(mean.precision) << ',' << fmt(mean.recall) << ','
        << fmt(mean.f1) << ',' << fmt_opt(mean.auc) << '\n';
    out << "std," << fmt(stddev.accuracy) << ',' << fmt(stddev.precision) << ',' << fmt(stddev.recall) << ','
        << fmt(stddev.f1) << ',' << fmt_opt(stddev.auc) << '\n';
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace aabcos

// aabcos: anti-aliased B-cos networks at desk scale.
// Subcommands: generate-data, train, evaluate, explain, epg, compare-variants.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "aabcos/experiment.hpp"

namespace fs = std::filesystem;
using namespace aabcos;

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

Manifest load_data_dir(const std::string& data) {
    fs::path p(data);
    if (fs::is_directory(p)) p /= "manifest.csv";
    return load_manifest(p);
}

void write_run_info(const fs::path& out_dir, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(out_dir / "run_info.txt");
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

void write_metrics_csv(const fs::path& path, const ClassificationMetrics& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "accuracy,precision,recall,f1,auc\n";
    out << fmt(m.accuracy) << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ','
        << fmt_opt(m.auc) << '\n';
}

void write_precision_curve(const fs::path& path, const EpgReport& report, const EpgConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "threshold,mean,std,n\n";
    for (double t : cfg.thresholds) {
        const EpgAggregate& a = find_aggregate(report, "epg_precision", t, "all");
        out << fmt(t) << ',' << fmt(a.mean) << ',' << fmt(a.stddev) << ',' << a.n << '\n';
    }
}

int cmd_generate_data(std::int64_t n, std::int64_t size, std::int64_t classes, std::uint64_t seed,
                      double prevalence, int folds, const std::string& out) {
    GenConfig gc;
    gc.n = n;
    gc.image_size = size;
    gc.k_classes = classes;
    gc.seed = seed;
    gc.prevalence = prevalence;
    Manifest m = generate_synthetic(gc, out);
    if (folds > 1) {
        kfold_split(m, folds, seed);
        write_manifest(m, fs::path(out) / "manifest.csv");
    }
    std::cout << "wrote " << m.samples.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config, const std::string& data, int fold, const std::string& out) {
    RunConfig rc = RunConfig::load(config);
    Manifest m = load_data_dir(data);
    fs::create_directories(out);
    rc.write_resolved(fs::path(out) / "config_resolved.txt");
    TrainResult r = train(rc.model, m, fold, rc.train);
    r.model.save((fs::path(out) / "checkpoint.bcos").string());
    r.write_log_csv((fs::path(out) / "train_log.csv").string());
    std::cout << "final val: acc=" << fmt(r.final_val.accuracy) << " f1=" << fmt(r.final_val.f1) << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data, int fold, const std::string& out) {
    BcosModel model = BcosModel::load(checkpoint);
    Manifest m = load_data_dir(data);
    std::vector<std::size_t> idx = fold_indices(m, fold, true);
    if (idx.empty()) throw DataError("no samples in fold " + std::to_string(fold));
    LossKind loss = model.config().mode == ClassMode::MultiClass ? LossKind::CrossEntropy
                                                                 : LossKind::BinaryCrossEntropy;
    EvalScores ev = evaluate_scores(model, m, idx, loss);
    ClassificationMetrics cm = classification_metrics(ev.flat_scores, ev.flat_labels);
    fs::create_directories(out);
    write_metrics_csv(fs::path(out) / "metrics.csv", cm);
    write_run_info(out, {{"command", "evaluate"}, {"checkpoint", checkpoint}, {"data", data},
                         {"fold", std::to_string(fold)}});
    std::cout << "accuracy=" << fmt(cm.accuracy) << " f1=" << fmt(cm.f1) << "\n";
    return 0;
}

int cmd_explain(const std::string& checkpoint, const std::string& image_path, int class_id, bool all,
                const std::string& out) {
    BcosModel model = BcosModel::load(checkpoint);
    GrayImage img = read_pgm(image_path);
    Tensor image = Tensor::from_data({1, 1, img.height, img.width},
                                     std::vector<float>(img.pixels.begin(), img.pixels.end()));
    fs::create_directories(out);
    std::vector<ContributionMap> maps;
    if (all)
        maps = contribution_maps_all(model, image);
    else
        maps.push_back(contribution_map(model, image, class_id));
    for (const auto& m : maps)
        render_heatmap(m, (fs::path(out) / ("map_class" + std::to_string(m.class_id))).string());
    write_run_info(out, {{"command", "explain"}, {"checkpoint", checkpoint}, {"image", image_path},
                         {"classes", all ? std::string("all") : std::to_string(class_id)}});
    std::cout << "wrote " << maps.size() << " contribution map(s) to " << out << "\n";
    return 0;
}

int cmd_epg(const std::string& checkpoint, const std::string& data, int fold,
            const std::string& thresholds, const std::string& out) {
    BcosModel model = BcosModel::load(checkpoint);
    Manifest m = load_data_dir(data);
    std::vector<std::size_t> idx;
    if (fold >= 0)
        idx = fold_indices(m, fold, true);
    else
        for (std::size_t i = 0; i < m.samples.size(); ++i) idx.push_back(i);
    if (idx.empty()) throw DataError("no samples selected for EPG evaluation");

    EpgConfig cfg;
    if (!thresholds.empty()) {
        cfg.thresholds.clear();
        std::string cur;
        for (char c : thresholds + ",") {
            if (c == ',' || c == ';') {
                if (!cur.empty()) cfg.thresholds.push_back(std::stod(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
    }
    cfg.validate();

    std::vector<EpgSample> samples = collect_epg_samples(model, m, idx);
    EpgReport report = epg_evaluate(samples, cfg);
    fs::create_directories(out);
    report.write_records_csv((fs::path(out) / "epg_records.csv").string());
    report.write_aggregates_csv((fs::path(out) / "epg_aggregates.csv").string());
    write_precision_curve(fs::path(out) / "curve_precision.csv", report, cfg);
    write_run_info(out, {{"command", "epg"}, {"checkpoint", checkpoint}, {"data", data},
                         {"fold", std::to_string(fold)},
                         {"skipped_missing_boxes", std::to_string(report.skipped_missing_boxes)},
                         {"undefined_values", std::to_string(report.undefined_values)}});
    std::cout << "evaluated " << samples.size() << " (sample,class) pairs; skipped "
              << report.skipped_missing_boxes << " without boxes\n";
    return 0;
}

int cmd_compare_variants(const std::string& config, const std::string& data, int fold,
                         const std::string& out) {
    RunConfig rc = RunConfig::load(config);
    Manifest m = load_data_dir(data);
    fs::create_directories(out);
    rc.write_resolved(fs::path(out) / "config_resolved.txt");

    std::ofstream table(fs::path(out) / "variants.csv");
    if (!table) throw DataError("cannot write variants.csv");
    table << "variant,accuracy,f1,epg_general_t0,epg_precision_t0,epg_recall_t0,mean_highfreq_energy\n";
    for (PoolKind kind : {PoolKind::Strided, PoolKind::BlurPool, PoolKind::FLCPool}) {
        VariantOutcome vo = run_variant_experiment(rc, kind, m, fold);
        double t0 = vo.epg.aggregates.empty() ? 0.0 : rc.epg.thresholds.front();
        const EpgAggregate& g = find_aggregate(vo.epg, "epg_general", t0, "all");
        const EpgAggregate& p = find_aggregate(vo.epg, "epg_precision", t0, "all");
        const EpgAggregate& r = find_aggregate(vo.epg, "epg_recall", t0, "all");
        table << pool_kind_name(kind) << ',' << fmt(vo.train_result.final_val.accuracy) << ','
              << fmt(vo.train_result.final_val.f1) << ',' << fmt(g.mean) << ',' << fmt(p.mean) << ','
              << fmt(r.mean) << ',' << fmt(vo.mean_highfreq) << '\n';
        vo.train_result.model.save((fs::path(out) / ("checkpoint_" + pool_kind_name(kind) + ".bcos")).string());
        std::cout << pool_kind_name(kind) << ": acc=" << fmt(vo.train_result.final_val.accuracy)
                  << " epg_p(t0)=" << fmt(p.mean) << " highfreq=" << fmt(vo.mean_highfreq) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anti-aliased B-cos networks: training, explanation and EPG evaluation"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate-data", "generate a synthetic bounding-box dataset");
    std::int64_t gn = 100, gsize = 32, gclasses = 2;
    std::uint64_t gseed = 0;
    double gprev = 0.3;
    int gfolds = 5;
    std::string gout;
    gen->add_option("--n", gn, "number of samples");
    gen->add_option("--size", gsize, "image side length");
    gen->add_option("--classes", gclasses, "number of classes");
    gen->add_option("--seed", gseed, "RNG seed");
    gen->add_option("--prevalence", gprev, "per-class positive rate");
    gen->add_option("--folds", gfolds, "cross-validation folds to assign");
    gen->add_option("--out", gout, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model on one fold split");
    std::string tconfig, tdata, tout;
    int tfold = 0;
    tr->add_option("--config", tconfig, "run config file")->required();
    tr->add_option("--data", tdata, "dataset directory or manifest.csv")->required();
    tr->add_option("--fold", tfold, "validation fold");
    tr->add_option("--out", tout, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "classification metrics of a checkpoint on a fold");
    std::string echeckpoint, edata, eout;
    int efold = 0;
    ev->add_option("--checkpoint", echeckpoint)->required();
    ev->add_option("--data", edata)->required();
    ev->add_option("--fold", efold);
    ev->add_option("--out", eout)->required();

    auto* ex = app.add_subcommand("explain", "contribution maps for one image");
    std::string xcheckpoint, ximage, xout;
    int xclass = 0;
    bool xall = false;
    ex->add_option("--checkpoint", xcheckpoint)->required();
    ex->add_option("--image", ximage, "PGM image")->required();
    ex->add_option("--class", xclass, "class id");
    ex->add_flag("--all", xall, "all classes");
    ex->add_option("--out", xout)->required();

    auto* ep = app.add_subcommand("epg", "energy-based pointing game report");
    std::string pcheckpoint, pdata, pthresholds, pout;
    int pfold = -1;
    ep->add_option("--checkpoint", pcheckpoint)->required();
    ep->add_option("--data", pdata)->required();
    ep->add_option("--fold", pfold, "restrict to one fold (-1 = all samples)");
    ep->add_option("--thresholds", pthresholds, "comma-separated thresholds");
    ep->add_option("--out", pout)->required();

    auto* cv = app.add_subcommand("compare-variants", "train and compare strided/blurpool/flc");
    std::string ccconfig, ccdata, ccout;
    int ccfold = 0;
    cv->add_option("--config", ccconfig)->required();
    cv->add_option("--data", ccdata)->required();
    cv->add_option("--fold", ccfold);
    cv->add_option("--out", ccout)->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate_data(gn, gsize, gclasses, gseed, gprev, gfolds, gout);
        if (tr->parsed()) return cmd_train(tconfig, tdata, tfold, tout);
        if (ev->parsed()) return cmd_evaluate(echeckpoint, edata, efold, eout);
        if (ex->parsed()) return cmd_explain(xcheckpoint, ximage, xclass, xall, xout);
        if (ep->parsed()) return cmd_epg(pcheckpoint, pdata, pfold, pthresholds, pout);
        if (cv->parsed()) return cmd_compare_variants(ccconfig, ccdata, ccfold, ccout);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

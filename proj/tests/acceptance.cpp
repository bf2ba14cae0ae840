// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "aabcos/experiment.hpp"
#include "oracles.hpp"

using namespace aabcos;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---- criterion 1: completeness ------------------------------------------

Outcome completeness_sweep() {
    auto t0 = std::chrono::steady_clock::now();
    const PoolKind kinds[3] = {PoolKind::Strided, PoolKind::BlurPool, PoolKind::FLCPool};
    const double bs[3] = {1.0, 1.5, 2.0};
    int checked = 0;
    double worst = 0.0;
    std::uint64_t seed = 0;
    while (checked < 50) {
        ++seed;
        ModelConfig mc;
        mc.input_size = 16;
        mc.num_classes = 2;
        mc.widths = {4, 6};
        mc.B = bs[seed % 3];
        mc.pool.kind = kinds[(seed / 3) % 3];
        BcosModelT<float> model(mc);
        Rng wrng(mix_seed(2024, seed));
        model.init_weights(wrng);
        Rng irng(mix_seed(4048, seed));
        Tensor img = oracles::random_tensor<float>({1, 1, 16, 16}, irng, 0.0, 1.0);
        ContributionMap m = contribution_map(model, img, static_cast<int>(seed % 2));
        if (std::abs(m.logit) < 1e-2) continue;  // relative error needs a signal
        double rel = std::abs(m.sum() - m.logit) / std::abs(m.logit);
        worst = std::max(worst, rel);
        ++checked;
    }
    double dt = seconds_since(t0);
    Outcome o;
    o.pass = worst < 1e-4 && dt < 30.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "50 (model,input) pairs over 3 variants, worst rel err %.2e (< 1e-4), %.1fs (< 30s)",
                  worst, dt);
    o.detail = buf;
    return o;
}

// ---- criterion 2: gradient suite ----------------------------------------

Outcome gradient_suite() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(31337);
    double worst = 0.0;
    int cases = 0;
    auto track = [&](double err) {
        worst = std::max(worst, err);
        ++cases;
    };

    for (int i = 0; i < 30; ++i) {  // B-cos conv, mixed B, input+weight grads
        BcosConvConfig cfg;
        cfg.in_channels = 2;
        cfg.out_units = 4;
        cfg.padding = 1;
        cfg.B = (i % 3 == 0) ? 1.5 : 2.0;
        Tensor64 x = oracles::random_tensor<double>({1, 2, 4, 4}, rng, 0.05, 1.0, true);
        Tensor64 w = oracles::random_tensor<double>({4, 2, 3, 3}, rng, -1.0, 1.0, true);
        track(oracles::fd_max_rel_error({&x, &w}, [&] { return sum_all(bcos_conv_forward(x, cfg, w)); }));
    }
    for (int i = 0; i < 20; ++i) {  // MaxOut
        Tensor64 x = oracles::random_tensor<double>({1, 4, 3, 3}, rng, -1.0, 1.0, true);
        track(oracles::fd_max_rel_error({&x}, [&] { return sum_all(maxout(x, 2)); }));
    }
    const std::vector<double> kernel = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16,
                                        2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};
    for (int i = 0; i < 15; ++i) {  // BlurPool
        Tensor64 x = oracles::random_tensor<double>({1, 2, 6, 6}, rng, -1.0, 1.0, true);
        track(oracles::fd_max_rel_error({&x}, [&] { return sum_all(blurpool(x, kernel, 3, 3, 2)); }));
    }
    for (int i = 0; i < 15; ++i) {  // FLCPool with a weighting to hit off-DC bins
        Tensor64 x = oracles::random_tensor<double>({1, 2, 6, 6}, rng, -1.0, 1.0, true);
        Tensor64 wts = oracles::random_tensor<double>({1, 2, 3, 3}, rng);
        track(oracles::fd_max_rel_error({&x}, [&] { return sum_all(mul(flcpool(x, 2), wts.detach())); }));
    }
    for (int i = 0; i < 10; ++i) {  // BCE loss
        Tensor64 logits = oracles::random_tensor<double>({2, 3}, rng, -2.0, 2.0, true);
        std::vector<double> targets;
        for (int j = 0; j < 6; ++j) targets.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
        track(oracles::fd_max_rel_error({&logits}, [&] { return bce_with_logits(logits, targets); }));
    }
    for (int i = 0; i < 10; ++i) {  // softmax cross entropy
        Tensor64 logits = oracles::random_tensor<double>({2, 4}, rng, -2.0, 2.0, true);
        std::vector<std::int64_t> targets = {static_cast<std::int64_t>(rng.uniform_index(4)),
                                             static_cast<std::int64_t>(rng.uniform_index(4))};
        track(oracles::fd_max_rel_error({&logits}, [&] { return softmax_cross_entropy(logits, targets); }));
    }

    double dt = seconds_since(t0);
    Outcome o;
    o.pass = cases == 100 && worst < 1e-3 && dt < 60.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d finite-difference cases, worst rel err %.2e (< 1e-3), %.1fs (< 60s)",
                  cases, worst, dt);
    o.detail = buf;
    return o;
}

// ---- criterion 3: alias removal -----------------------------------------

Outcome alias_removal() {
    double worst_ratio = 0.0;
    const std::int64_t n = 24;  // divisible by the tested periods
    for (auto [ky, kx] : {std::pair<int, int>{12, 0}, {0, 12}, {8, 0}, {0, 8}, {8, 8}, {12, 12}, {7, 9}}) {
        // integer bins with |f| > 0.25 on both active axes
        std::vector<double> img(static_cast<std::size_t>(n * n));
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                img[static_cast<std::size_t>(i * n + j)] =
                    std::cos(2.0 * M_PI * (static_cast<double>(ky * i) + static_cast<double>(kx * j)) /
                             static_cast<double>(n));
        Tensor64 x = Tensor64::from_data({1, 1, n, n}, std::move(img));
        Tensor64 y = flcpool(x, 2);
        double ein = 0.0, eout = 0.0;
        for (double v : x.values()) ein += v * v;
        for (double v : y.values()) eout += v * v;
        worst_ratio = std::max(worst_ratio, eout / ein);
    }

    std::vector<double> cb(64);
    for (std::int64_t i = 0; i < 8; ++i)
        for (std::int64_t j = 0; j < 8; ++j) cb[static_cast<std::size_t>(i * 8 + j)] = ((i + j) % 2) ? -1.0 : 1.0;
    const std::vector<double> kernel = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16,
                                        2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};
    Tensor64 pooled = blurpool(Tensor64::from_data({1, 1, 8, 8}, cb), kernel, 3, 3, 2);
    double cb_max = 0.0;
    for (double v : pooled.values()) cb_max = std::max(cb_max, std::abs(v));

    Outcome o;
    o.pass = worst_ratio < 1e-6 && cb_max == 0.0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "super-Nyquist energy ratio through FLC %.2e (< 1e-6); checkerboard through BlurPool max |v| = %g (exact 0)",
                  worst_ratio, cb_max);
    o.detail = buf;
    return o;
}

// ---- criterion 4: EPG oracle equivalence --------------------------------

Outcome epg_oracle_equivalence() {
    Rng rng(271828);
    double worst = 0.0;
    int triples = 0, mismatches = 0;
    while (triples < 1000) {
        std::int64_t h = 3 + static_cast<std::int64_t>(rng.uniform_index(14));
        std::int64_t w = 3 + static_cast<std::int64_t>(rng.uniform_index(14));
        std::vector<float> map(static_cast<std::size_t>(h * w));
        for (auto& v : map) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<BoundingBox> boxes;
        int nb = 1 + static_cast<int>(rng.uniform_index(2));
        for (int b = 0; b < nb; ++b) {
            BoundingBox bb;
            bb.w = 1 + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(w)));
            bb.h = 1 + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(h)));
            bb.x = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(w - bb.w + 1)));
            bb.y = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(h - bb.h + 1)));
            boxes.push_back(bb);
        }
        double t = rng.uniform();
        ++triples;

        auto compare = [&](std::optional<double> got, std::optional<double> want) {
            if (got.has_value() != want.has_value()) {
                ++mismatches;
                return;
            }
            if (got) worst = std::max(worst, std::abs(*got - *want));
        };
        compare(epg_general(map, h, w, boxes), oracles::brute_epg_general(map, h, w, boxes));
        compare(epg_precision(map, h, w, boxes, t), oracles::brute_epg_precision(map, h, w, boxes, t));
        compare(epg_recall(map, h, w, boxes, t), oracles::brute_epg_recall(map, h, w, boxes, t));
    }
    Outcome o;
    o.pass = mismatches == 0 && worst <= 1e-12;
    char buf[160];
    std::snprintf(buf, sizeof buf, "1000 random (map,box,t) triples, %d definedness mismatches, worst |diff| %.2e (<= 1e-12)",
                  mismatches, worst);
    o.detail = buf;
    return o;
}

// ---- criterion 5: chance baseline ---------------------------------------

Outcome chance_baseline() {
    // uniform maps: epg_precision equals the box-area fraction exactly, so the
    // mean over random placements equals the configured coverage (34x34 on
    // 100x100 = 11.56%, matching the reported 11.65% within tolerance).
    Rng rng(5150);
    const std::int64_t hw = 100, box = 34;
    double mean = 0.0, coverage = 0.0;
    const int samples = 100;
    for (int i = 0; i < samples; ++i) {
        std::vector<float> map(static_cast<std::size_t>(hw * hw), 1.0f);
        BoundingBox b;
        b.w = b.h = box;
        b.x = static_cast<std::int64_t>(rng.uniform_index(hw - box + 1));
        b.y = static_cast<std::int64_t>(rng.uniform_index(hw - box + 1));
        auto v = epg_precision(map, hw, hw, {b}, 0.0);
        if (!v) return {false, "undefined epg on a uniform map"};
        mean += *v;
        coverage += static_cast<double>(box * box) / static_cast<double>(hw * hw);
    }
    mean /= samples;
    coverage /= samples;
    Outcome o;
    o.pass = std::abs(mean - coverage) <= 0.01 && std::abs(mean - 0.1165) <= 0.01;
    char buf[160];
    std::snprintf(buf, sizeof buf, "uniform maps: mean epg_precision %.4f vs coverage %.4f, target 0.1165 +/- 0.01",
                  mean, coverage);
    o.detail = buf;
    return o;
}

// ---- criteria 6/7/8/10: the desk-scale experiment ------------------------

struct ExperimentState {
    fs::path dir;
    Manifest manifest;
    RunConfig rc;
    VariantOutcome flc, strided, blurpool;
};

RunConfig experiment_config() {
    return RunConfig::parse(
        "num_classes=2\n"
        "input_size=32\n"
        "widths=16;32;64\n"
        "epochs=30\n"
        "batch_size=16\n"
        "lr=0.01\n"
        "logit_scale=8\n"
        "seed=1\n"
        "pool=flc\n",
        "acceptance");
}

Outcome end_to_end(ExperimentState& st) {
    auto t0 = std::chrono::steady_clock::now();
    st.dir = fs::temp_directory_path() / "aabcos_acceptance";
    fs::remove_all(st.dir);
    fs::create_directories(st.dir);

    GenConfig gc;
    gc.n = 400;
    gc.image_size = 32;
    gc.k_classes = 2;
    gc.seed = 11;
    st.manifest = generate_synthetic(gc, st.dir / "data");
    kfold_split(st.manifest, 5, gc.seed);
    write_manifest(st.manifest, st.dir / "data" / "manifest.csv");

    st.rc = experiment_config();
    st.flc = run_variant_experiment(st.rc, PoolKind::FLCPool, st.manifest, 0);
    double acc = st.flc.train_result.final_val.accuracy;
    double epg_p0 = find_aggregate(st.flc.epg, "epg_precision", 0.0, "all").mean;
    double dt = seconds_since(t0);

    Outcome o;
    o.pass = acc >= 0.90 && (epg_p0 - st.flc.box_coverage) >= 0.15 && dt < 300.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "FLC on n=400 @32x32, 30 epochs: val acc %.3f (>= 0.90); epg_precision(t=0) %.3f vs coverage %.3f (margin >= 0.15); %.0fs (< 300s)",
                  acc, epg_p0, st.flc.box_coverage, dt);
    o.detail = buf;
    return o;
}

Outcome artifact_ordering(ExperimentState& st) {
    st.strided = run_variant_experiment(st.rc, PoolKind::Strided, st.manifest, 0);
    st.blurpool = run_variant_experiment(st.rc, PoolKind::BlurPool, st.manifest, 0);
    const auto& s = st.strided.highfreq_per_image;
    const auto& f = st.flc.highfreq_per_image;
    const auto& b = st.blurpool.highfreq_per_image;
    if (s.size() != f.size() || s.size() != b.size() || s.empty())
        return {false, "per-image energy lists are misaligned"};
    int wins = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] > f[i] && s[i] > b[i]) ++wins;
    double frac = static_cast<double>(wins) / static_cast<double>(s.size());
    Outcome o;
    o.pass = frac >= 0.90;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "strided map highfreq energy exceeds FLC and BlurPool on %.0f%% of %zu val images (>= 90%%); means s=%.3f b=%.3f f=%.3f",
                  100.0 * frac, s.size(), st.strided.mean_highfreq, st.blurpool.mean_highfreq,
                  st.flc.mean_highfreq);
    o.detail = buf;
    return o;
}

Outcome threshold_sweep(ExperimentState& st) {
    // the CLI epg command must export the precision-vs-threshold curve
    fs::path ckpt = st.dir / "flc.bcos";
    st.flc.train_result.model.save(ckpt.string());
    fs::path out = st.dir / "epg_cli";
    std::string cmd = std::string(AABCOS_CLI_PATH) + " epg --checkpoint " + ckpt.string() + " --data " +
                      (st.dir / "data").string() + " --fold 0 --out " + out.string() + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "cmd_epg exited non-zero"};

    std::ifstream in(out / "curve_precision.csv");
    if (!in) return {false, "curve_precision.csv missing"};
    std::string header;
    std::getline(in, header);
    int rows = 0, defined = 0;
    bool in_range = true;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        double t, mean, sd;
        long n;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%ld", &t, &mean, &sd, &n) != 4)
            return {false, "unparseable curve row: " + line};
        if (n > 0) {
            ++defined;
            if (mean < 0.0 || mean > 1.0) in_range = false;
        }
    }
    Outcome o;
    o.pass = rows == 10 && defined == 10 && in_range;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "cmd_epg exported the precision curve: %d thresholds, %d defined, all means in [0,1] (shape not asserted)",
                  rows, defined);
    o.detail = buf;
    return o;
}

Outcome non_reproducibility() {
    return {true,
            "paper Tables 1-7 absolute numbers need RSNA/VinBigData and pretrained ResNet50 backbones; "
            "out of scope by design, criteria 1-8 are the substitute suite"};
}

Outcome determinism(ExperimentState& st) {
    // repeat the criterion-6 training with the same seed; logs and reports
    // must match byte for byte
    VariantOutcome again = run_variant_experiment(st.rc, PoolKind::FLCPool, st.manifest, 0);
    fs::path a = st.dir / "det_a", bdir = st.dir / "det_b";
    fs::create_directories(a);
    fs::create_directories(bdir);
    st.flc.train_result.write_log_csv((a / "train_log.csv").string());
    again.train_result.write_log_csv((bdir / "train_log.csv").string());
    st.flc.epg.write_records_csv((a / "epg_records.csv").string());
    again.epg.write_records_csv((bdir / "epg_records.csv").string());
    st.flc.epg.write_aggregates_csv((a / "epg_aggregates.csv").string());
    again.epg.write_aggregates_csv((bdir / "epg_aggregates.csv").string());

    bool logs = slurp(a / "train_log.csv") == slurp(bdir / "train_log.csv");
    bool recs = slurp(a / "epg_records.csv") == slurp(bdir / "epg_records.csv");
    bool aggs = slurp(a / "epg_aggregates.csv") == slurp(bdir / "epg_aggregates.csv");
    Outcome o;
    o.pass = logs && recs && aggs;
    std::ostringstream os;
    os << "rerun with identical seed: train_log " << (logs ? "identical" : "DIFFERS") << ", epg records "
       << (recs ? "identical" : "DIFFERS") << ", aggregates " << (aggs ? "identical" : "DIFFERS");
    o.detail = os.str();
    return o;
}

}  // namespace

int main() {
    ExperimentState st;
    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Entry> criteria = {
        {1, "completeness (faithfulness)", [&] { return completeness_sweep(); }},
        {2, "gradient suite", [&] { return gradient_suite(); }},
        {3, "alias removal", [&] { return alias_removal(); }},
        {4, "EPG oracle equivalence", [&] { return epg_oracle_equivalence(); }},
        {5, "chance-baseline sanity", [&] { return chance_baseline(); }},
        {6, "end-to-end desk-scale experiment", [&] { return end_to_end(st); }},
        {7, "grid-artifact ordering", [&] { return artifact_ordering(st); }},
        {8, "threshold-sweep export", [&] { return threshold_sweep(st); }},
        {9, "explicit non-reproducibility", [&] { return non_reproducibility(); }},
        {10, "determinism", [&] { return determinism(st); }},
    };

    int failures = 0;
    for (auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}

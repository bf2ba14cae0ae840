#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "aabcos/pooling.hpp"
#include "aabcos/tensor.hpp"

namespace aabcos {

enum class ClassMode { MultiClass, MultiLabel };

inline std::string class_mode_name(ClassMode m) {
    return m == ClassMode::MultiClass ? "multiclass" : "multilabel";
}
inline ClassMode class_mode_from(const std::string& s) {
    if (s == "multiclass") return ClassMode::MultiClass;
    if (s == "multilabel") return ClassMode::MultiLabel;
    throw ConfigError("unknown classification mode '" + s + "'");
}

// Complement encoding: [N,C,H,W] in [0,1] -> [N,2C,H,W] with channel pairs
// (x, 1-x). Produces a fresh leaf; set requires_grad when the encoded input
// is the differentiation target (explanations).
template <typename T>
TensorT<T> encode_input(const TensorT<T>& image, bool requires_grad = false) {
    if (image.shape().size() != 4) throw ShapeError("encode_input: expected [N,C,H,W]");
    const std::int64_t n = image.dim(0), c = image.dim(1), hw = image.dim(2) * image.dim(3);
    for (T v : image.values())
        if (v < T(0) || v > T(1)) throw DataError("encode_input: values must lie in [0,1]");
    std::vector<T> out(static_cast<std::size_t>(n * 2 * c * hw));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* src = image.values().data() + (b * c + ch) * hw;
            T* pos = out.data() + (b * 2 * c + 2 * ch) * hw;
            T* neg = pos + hw;
            for (std::int64_t i = 0; i < hw; ++i) {
                pos[i] = src[i];
                neg[i] = T(1) - src[i];
            }
        }
    return TensorT<T>::from_data({n, 2 * c, image.dim(2), image.dim(3)}, std::move(out), requires_grad);
}

struct BcosConvConfig {
    std::int64_t in_channels = 0;
    std::int64_t out_units = 0;
    std::int64_t kernel_h = 3, kernel_w = 3;
    std::int64_t stride = 1;
    std::int64_t padding = 0;
    double B = 2.0;
    std::int64_t maxout_group = 2;
    double norm_epsilon = 1e-6;

    void validate() const {
        if (B < 1.0) throw ConfigError("B-cos exponent B must be >= 1");
        if (stride < 1) throw ConfigError("conv stride must be >= 1");
        if (maxout_group < 1 || out_units % maxout_group != 0)
            throw ConfigError("out_units must be divisible by maxout_group");
    }
};

// B-cos convolution: per patch p and unit with unit-normalized weight u,
//   y = |cos|^(B-1) * (u . p),   cos = (u . p) / (||p|| + eps).
// With frozen_scale the alignment factor is treated as a constant, which
// makes the output exactly linear in the input (dynamic-weight view).
// Returns the output and optionally the scale values used (for W(x) replay).
template <typename T>
TensorT<T> bcos_conv_forward(const TensorT<T>& x, const BcosConvConfig& cfg, const TensorT<T>& weights,
                             bool frozen_scale = false, std::vector<T>* scale_out = nullptr) {
    cfg.validate();
    if (weights.shape() != Shape{cfg.out_units, cfg.in_channels, cfg.kernel_h, cfg.kernel_w})
        throw ShapeError("bcos_conv_forward: weight shape " + shape_str(weights.shape()) +
                         " does not match config");
    TensorT<T> w_unit = unit_normalize_rows(weights);
    TensorT<T> z = conv2d(x, w_unit, cfg.stride, cfg.padding);
    if (cfg.B == 1.0) {
        if (scale_out) scale_out->assign(z.values().size(), T(1));
        return z;
    }
    TensorT<T> q = patch_sumsq(x, cfg.kernel_h, cfg.kernel_w, cfg.stride, cfg.padding);
    TensorT<T> nrm = add_scalar(sqrt_t(q), static_cast<T>(cfg.norm_epsilon));
    TensorT<T> cosine = div(z, broadcast_channel(nrm, cfg.out_units));
    TensorT<T> s = abs_pow(cosine, static_cast<T>(cfg.B - 1.0));
    if (scale_out) *scale_out = s.values();
    if (frozen_scale) s = s.detach();
    return mul(s, z);
}

struct ModelConfig {
    std::int64_t input_size = 32;
    std::int64_t in_channels = 1;
    bool input_encoding = true;
    std::int64_t num_classes = 2;
    std::vector<std::int64_t> widths = {16, 32, 64};  // per-stage channels after MaxOut
    std::int64_t kernel = 3;
    double B = 2.0;
    std::int64_t maxout_group = 2;
    double norm_epsilon = 1e-6;
    // Constant multiplier on the logits. Keeps the map linear (completeness is
    // unaffected) while giving sigmoid/softmax losses a usable logit range.
    double logit_scale = 1.0;
    PoolVariant pool;
    ClassMode mode = ClassMode::MultiLabel;

    std::int64_t encoded_channels() const { return input_encoding ? 2 * in_channels : in_channels; }

    void validate() const {
        if (input_size < 1) throw ConfigError("input_size must be positive");
        if (num_classes < 1) throw ConfigError("num_classes must be positive");
        if (widths.empty()) throw ConfigError("model needs at least one stage");
        if (B < 1.0) throw ConfigError("B must be >= 1");
        if (logit_scale <= 0.0) throw ConfigError("logit_scale must be positive");
        if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd and positive");
        pool.validate();
        std::int64_t size = input_size;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            if (widths[i] < 1) throw ConfigError("stage width must be positive");
            size = (size + pool.stride - 1) / pool.stride;
        }
        if (size < 1) throw ConfigError("too many stages for input size");
    }
};

// Frozen per-input state of the piecewise-linear map W(x): alignment scales
// and MaxOut selections captured during a forward pass.
template <typename T>
struct LinearCapture {
    std::vector<std::vector<T>> stage_scales;                 // per stage, pre-MaxOut shape
    std::vector<std::shared_ptr<std::vector<std::int32_t>>> stage_argmax;  // per stage
    std::vector<T> head_scale;
};

// Bias-free B-cos network:
//   encode -> [BcosConv(stride 1) -> MaxOut -> pool(stride)] x stages
//          -> GlobalAvgPool -> BcosHead(1x1) -> logits.
// Strided reductions are decomposed into stride-1 conv + pooling for every
// variant; the Strided variant subsamples, the others anti-alias.
template <typename T>
class BcosModelT {
public:
    BcosModelT() = default;

    explicit BcosModelT(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::int64_t in_c = cfg_.encoded_channels();
        for (std::int64_t wdt : cfg_.widths) {
            stage_weights_.push_back(TensorT<T>::zeros(
                {wdt * cfg_.maxout_group, in_c, cfg_.kernel, cfg_.kernel}, true));
            in_c = wdt;
        }
        head_weights_ = TensorT<T>::zeros({cfg_.num_classes, in_c, 1, 1}, true);
    }

    void init_weights(Rng& rng) {
        for (auto& w : stage_weights_) {
            double fan_in = static_cast<double>(w.numel() / w.dim(0));
            for (auto& v : w.values()) v = static_cast<T>(rng.normal(0.0, 1.0 / std::sqrt(fan_in)));
        }
        double fan_in = static_cast<double>(head_weights_.numel() / head_weights_.dim(0));
        for (auto& v : head_weights_.values()) v = static_cast<T>(rng.normal(0.0, 1.0 / std::sqrt(fan_in)));
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<TensorT<T>*> parameters() {
        std::vector<TensorT<T>*> ps;
        for (auto& w : stage_weights_) ps.push_back(&w);
        ps.push_back(&head_weights_);
        return ps;
    }
    const TensorT<T>& stage_weight(std::size_t i) const { return stage_weights_[i]; }
    TensorT<T>& stage_weight(std::size_t i) { return stage_weights_[i]; }
    const TensorT<T>& head_weight() const { return head_weights_; }
    TensorT<T>& head_weight() { return head_weights_; }

    // encoded: [N, encoded_channels, input_size, input_size]. frozen freezes
    // the dynamic scales (and detaches weights, so shared-weight inference is
    // write-free). capture, when given, records the W(x) state.
    TensorT<T> forward(const TensorT<T>& encoded, bool frozen = false,
                       LinearCapture<T>* capture = nullptr) const {
        check_input(encoded);
        if (capture) {
            capture->stage_scales.clear();
            capture->stage_argmax.clear();
        }
        TensorT<T> h = encoded;
        std::int64_t in_c = cfg_.encoded_channels();
        for (std::size_t i = 0; i < stage_weights_.size(); ++i) {
            BcosConvConfig c = stage_cfg(i, in_c);
            TensorT<T> w = frozen ? stage_weights_[i].detach() : stage_weights_[i];
            std::vector<T> scales;
            h = bcos_conv_forward(h, c, w, frozen, capture ? &scales : nullptr);
            if (capture) capture->stage_scales.push_back(std::move(scales));
            TensorT<T> pre = h;
            h = maxout(h, cfg_.maxout_group);
            if (capture) capture->stage_argmax.push_back(last_maxout_argmax(pre, h));
            h = apply_pool(h, cfg_.pool);
            in_c = cfg_.widths[i];
        }
        h = global_avg_pool(h);
        BcosConvConfig hc = head_cfg(in_c);
        TensorT<T> hw = frozen ? head_weights_.detach() : head_weights_;
        std::vector<T> head_scale;
        h = bcos_conv_forward(h, hc, hw, frozen, capture ? &head_scale : nullptr);
        if (capture) capture->head_scale = std::move(head_scale);
        if (cfg_.logit_scale != 1.0) h = scale(h, static_cast<T>(cfg_.logit_scale));
        return reshape(h, {encoded.dim(0), cfg_.num_classes});
    }

    // Applies the captured linear map to an arbitrary input v (same shape as
    // the encoded input). Used to materialize W(x) column-by-column.
    TensorT<T> apply_linear(const LinearCapture<T>& cap, const TensorT<T>& v) const {
        check_input(v);
        TensorT<T> h = v;
        std::int64_t in_c = cfg_.encoded_channels();
        for (std::size_t i = 0; i < stage_weights_.size(); ++i) {
            BcosConvConfig c = stage_cfg(i, in_c);
            TensorT<T> z = conv2d(h, unit_normalize_rows(stage_weights_[i].detach()), c.stride, c.padding);
            TensorT<T> s = TensorT<T>::from_data(z.shape(), cap.stage_scales[i]);
            h = maxout_select(mul(s, z), cfg_.maxout_group, *cap.stage_argmax[i]);
            h = apply_pool(h, cfg_.pool);
            in_c = cfg_.widths[i];
        }
        h = global_avg_pool(h);
        TensorT<T> z = conv2d(h, unit_normalize_rows(head_weights_.detach()), 1, 0);
        TensorT<T> s = TensorT<T>::from_data(z.shape(), cap.head_scale);
        TensorT<T> logits = mul(s, z);
        if (cfg_.logit_scale != 1.0) logits = scale(logits, static_cast<T>(cfg_.logit_scale));
        return reshape(logits, {v.dim(0), cfg_.num_classes});
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint '" + path + "'");
        out << "BCOSMODEL v1\n";
        out << "input_size=" << cfg_.input_size << "\n";
        out << "in_channels=" << cfg_.in_channels << "\n";
        out << "input_encoding=" << (cfg_.input_encoding ? 1 : 0) << "\n";
        out << "num_classes=" << cfg_.num_classes << "\n";
        out << "widths=" << join_widths() << "\n";
        out << "kernel=" << cfg_.kernel << "\n";
        out << "B=" << format_double(cfg_.B) << "\n";
        out << "maxout_group=" << cfg_.maxout_group << "\n";
        out << "norm_epsilon=" << format_double(cfg_.norm_epsilon) << "\n";
        out << "logit_scale=" << format_double(cfg_.logit_scale) << "\n";
        out << "pool=" << pool_kind_name(cfg_.pool.kind) << "\n";
        out << "pool_stride=" << cfg_.pool.stride << "\n";
        out << "mode=" << class_mode_name(cfg_.mode) << "\n";
        std::int64_t params = 0;
        for (const auto& w : stage_weights_) params += w.numel();
        params += head_weights_.numel();
        out << "params=" << params << "\n\n";
        for (const auto& w : stage_weights_) write_blob(out, w);
        write_blob(out, head_weights_);
        if (!out) throw DataError("failed writing checkpoint '" + path + "'");
    }

    static BcosModelT load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot read checkpoint '" + path + "'");
        std::string line;
        if (!std::getline(in, line) || line != "BCOSMODEL v1")
            throw DataError("checkpoint '" + path + "': bad magic line");
        std::map<std::string, std::string> kv;
        while (std::getline(in, line) && !line.empty()) {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw DataError("checkpoint '" + path + "': malformed line '" + line + "'");
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        ModelConfig cfg;
        cfg.input_size = std::stoll(need(kv, "input_size", path));
        cfg.in_channels = std::stoll(need(kv, "in_channels", path));
        cfg.input_encoding = need(kv, "input_encoding", path) == "1";
        cfg.num_classes = std::stoll(need(kv, "num_classes", path));
        cfg.widths.clear();
        std::string ws = need(kv, "widths", path);
        for (std::size_t pos = 0; pos < ws.size();) {
            auto semi = ws.find(';', pos);
            if (semi == std::string::npos) semi = ws.size();
            cfg.widths.push_back(std::stoll(ws.substr(pos, semi - pos)));
            pos = semi + 1;
        }
        cfg.kernel = std::stoll(need(kv, "kernel", path));
        cfg.B = std::stod(need(kv, "B", path));
        cfg.maxout_group = std::stoll(need(kv, "maxout_group", path));
        cfg.norm_epsilon = std::stod(need(kv, "norm_epsilon", path));
        cfg.logit_scale = std::stod(need(kv, "logit_scale", path));
        cfg.pool.kind = pool_kind_from(need(kv, "pool", path));
        cfg.pool.stride = std::stoll(need(kv, "pool_stride", path));
        cfg.mode = class_mode_from(need(kv, "mode", path));
        std::int64_t params = std::stoll(need(kv, "params", path));

        BcosModelT m(cfg);
        std::int64_t expect = 0;
        for (const auto& w : m.stage_weights_) expect += w.numel();
        expect += m.head_weights_.numel();
        if (expect != params)
            throw DataError("checkpoint '" + path + "': parameter count mismatch");
        for (auto& w : m.stage_weights_) read_blob(in, w, path);
        read_blob(in, m.head_weights_, path);
        return m;
    }

private:
    BcosConvConfig stage_cfg(std::size_t i, std::int64_t in_c) const {
        BcosConvConfig c;
        c.in_channels = in_c;
        c.out_units = cfg_.widths[i] * cfg_.maxout_group;
        c.kernel_h = c.kernel_w = cfg_.kernel;
        c.stride = 1;
        c.padding = cfg_.kernel / 2;
        c.B = cfg_.B;
        c.maxout_group = cfg_.maxout_group;
        c.norm_epsilon = cfg_.norm_epsilon;
        return c;
    }

    BcosConvConfig head_cfg(std::int64_t in_c) const {
        BcosConvConfig c;
        c.in_channels = in_c;
        c.out_units = cfg_.num_classes;
        c.kernel_h = c.kernel_w = 1;
        c.stride = 1;
        c.padding = 0;
        c.B = cfg_.B;
        c.maxout_group = 1;
        c.norm_epsilon = cfg_.norm_epsilon;
        return c;
    }

    void check_input(const TensorT<T>& x) const {
        Shape want{x.shape().empty() ? 0 : x.dim(0), cfg_.encoded_channels(), cfg_.input_size, cfg_.input_size};
        if (x.shape().size() != 4 || x.dim(1) != want[1] || x.dim(2) != want[2] || x.dim(3) != want[3])
            throw ShapeError("model forward: input " + shape_str(x.shape()) + " does not match configured " +
                             shape_str(want));
    }

    // Recomputes the argmax selection of a maxout output (ties to the lower
    // index, matching the op).
    std::shared_ptr<std::vector<std::int32_t>> last_maxout_argmax(const TensorT<T>& pre,
                                                                  const TensorT<T>& post) const {
        auto idx = std::make_shared<std::vector<std::int32_t>>(post.values().size());
        const std::int64_t n = pre.dim(0), c = pre.dim(1), hw = pre.dim(2) * pre.dim(3);
        const std::int64_t g = cfg_.maxout_group, co = c / g;
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t oc = 0; oc < co; ++oc)
                for (std::int64_t i = 0; i < hw; ++i) {
                    T best = pre.values()[(b * c + oc * g) * hw + i];
                    std::int32_t bg = 0;
                    for (std::int64_t k = 1; k < g; ++k) {
                        T v = pre.values()[(b * c + oc * g + k) * hw + i];
                        if (v > best) { best = v; bg = static_cast<std::int32_t>(k); }
                    }
                    (*idx)[(b * co + oc) * hw + i] = bg;
                }
        return idx;
    }

    std::string join_widths() const {
        std::string s;
        for (std::size_t i = 0; i < cfg_.widths.size(); ++i)
            s += (i ? ";" : "") + std::to_string(cfg_.widths[i]);
        return s;
    }

    static std::string format_double(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    static void write_blob(std::ofstream& out, const TensorT<T>& w) {
        for (T v : w.values()) {
            float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }

    static void read_blob(std::ifstream& in, TensorT<T>& w, const std::string& path) {
        for (auto& v : w.values()) {
            float f = 0.0f;
            in.read(reinterpret_cast<char*>(&f), sizeof(float));
            if (!in) throw DataError("checkpoint '" + path + "': truncated weight blob");
            v = static_cast<T>(f);
        }
    }

    static std::string need(const std::map<std::string, std::string>& kv, const std::string& key,
                            const std::string& path) {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("checkpoint '" + path + "': missing key '" + key + "'");
        return it->second;
    }

    ModelConfig cfg_;
    std::vector<TensorT<T>> stage_weights_;
    TensorT<T> head_weights_;
};

// Gather variant of maxout driven by stored selections (W(x) replay).
template <typename T>
TensorT<T> maxout_select(const TensorT<T>& x, std::int64_t group, const std::vector<std::int32_t>& argmax) {
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t co = c / group, hw = h * w;
    if (static_cast<std::int64_t>(argmax.size()) != n * co * hw)
        throw ShapeError("maxout_select: selection size mismatch");
    std::vector<T> out(argmax.size());
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t oc = 0; oc < co; ++oc)
            for (std::int64_t i = 0; i < hw; ++i) {
                std::int64_t o = (b * co + oc) * hw + i;
                out[o] = x.values()[(b * c + oc * group + argmax[o]) * hw + i];
            }
    return TensorT<T>::from_data({n, co, h, w}, std::move(out));
}

using BcosModel = BcosModelT<float>;

}  // namespace aabcos

#pragma once

#include <string>
#include <vector>

#include "aabcos/image_io.hpp"
#include "aabcos/layers.hpp"

namespace aabcos {

// Per-class contribution map L^c: one signed value per input pixel (encoded
// channel pairs summed), whose total equals the class logit (completeness).
struct ContributionMap {
    int class_id = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<float> values;  // row-major H*W
    double logit = 0.0;
    PoolKind variant = PoolKind::FLCPool;

    double sum() const {
        double s = 0.0;
        for (float v : values) s += v;
        return s;
    }
};

namespace detail {

// Reduce an input-shaped gradient*input product over channels to H x W.
template <typename T>
std::vector<float> channel_sum_product(const TensorT<T>& input) {
    const std::int64_t c = input.dim(1), h = input.dim(2), w = input.dim(3);
    std::vector<float> out(static_cast<std::size_t>(h * w), 0.0f);
    const auto& vals = input.values();
    const auto& grads = input.grad();
    for (std::int64_t ch = 0; ch < c; ++ch) {
        const T* v = vals.data() + ch * h * w;
        const T* g = grads.data() + ch * h * w;
        for (std::int64_t i = 0; i < h * w; ++i)
            out[static_cast<std::size_t>(i)] += static_cast<float>(v[i] * g[i]);
    }
    return out;
}

template <typename T>
TensorT<T> model_input_leaf(const BcosModelT<T>& model, const TensorT<T>& image) {
    if (image.shape().size() != 4 || image.dim(0) != 1)
        throw ShapeError("contribution maps are extracted per single image [1,C,H,W]");
    if (model.config().input_encoding) return encode_input(image, /*requires_grad=*/true);
    TensorT<T> leaf = image.detach();
    return TensorT<T>::from_data(leaf.shape(), leaf.values(), /*requires_grad=*/true);
}

}  // namespace detail

// Extracts L^c by freezing all dynamic weights and MaxOut selections at their
// forward values (the model is then exactly linear in its input) and reading
// row c of W(x) off the input gradient.
template <typename T>
ContributionMap contribution_map(const BcosModelT<T>& model, const TensorT<T>& image, int class_id) {
    if (class_id < 0 || class_id >= static_cast<int>(model.config().num_classes))
        throw DataError("contribution_map: invalid class id " + std::to_string(class_id));
    TensorT<T> input = detail::model_input_leaf(model, image);
    TensorT<T> logits = model.forward(input, /*frozen=*/true);
    TensorT<T> target = select_scalar(logits, class_id);
    target.backward();

    ContributionMap m;
    m.class_id = class_id;
    m.height = input.dim(2);
    m.width = input.dim(3);
    m.values = detail::channel_sum_product(input);
    m.logit = static_cast<double>(target.item());
    m.variant = model.config().pool.kind;
    return m;
}

// All classes from a single frozen forward; one backward per class.
template <typename T>
std::vector<ContributionMap> contribution_maps_all(const BcosModelT<T>& model, const TensorT<T>& image) {
    TensorT<T> input = detail::model_input_leaf(model, image);
    TensorT<T> logits = model.forward(input, /*frozen=*/true);
    std::vector<ContributionMap> maps;
    maps.reserve(static_cast<std::size_t>(model.config().num_classes));
    for (int c = 0; c < static_cast<int>(model.config().num_classes); ++c) {
        logits.zero_grad_graph();
        TensorT<T> target = select_scalar(logits, c);
        target.backward();
        ContributionMap m;
        m.class_id = c;
        m.height = input.dim(2);
        m.width = input.dim(3);
        m.values = detail::channel_sum_product(input);
        m.logit = static_cast<double>(target.item());
        m.variant = model.config().pool.kind;
        maps.push_back(std::move(m));
    }
    return maps;
}

// Raw map file: `EPMAP v1 <H> <W> <class_id> <logit>` + LE float32 values.
void write_epmap(const ContributionMap& map, const std::string& path);
ContributionMap read_epmap(const std::string& path);

// Signed diverging colors, normalized by max |value|: positive -> red,
// negative -> blue.
std::vector<std::uint8_t> heatmap_rgb(const ContributionMap& map);

// Writes `<base>.png` and `<base>.epmap`.
void render_heatmap(const ContributionMap& map, const std::string& base_path);

}  // namespace aabcos

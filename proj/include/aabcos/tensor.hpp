#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <vector>

#include "aabcos/common.hpp"

namespace aabcos {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor with reverse-mode autodiff. A tensor is a handle to a
// graph node; the recorded graph (parents + backward closures) is the tape.
// Handles are value types and cheap to copy. Instantiated for float (default
// compute) and double (gradient-check builds).
template <typename T>
class TensorT {
public:
    using Scalar = T;

    struct Node {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;  // sized on first use
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;

        std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
        void ensure_grad() {
            if (grad.size() != values.size()) grad.assign(values.size(), T(0));
        }
    };

    TensorT() = default;

    static TensorT zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static TensorT filled(Shape shape, T value, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values.assign(static_cast<std::size_t>(shape_numel(n->shape)), value);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    // Leaf construction validates finiteness (NaN/Inf rejected).
    static TensorT from_data(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
        for (T v : values)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError("leaf tensor contains non-finite value");
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
        std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
        for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
        return from_data(std::move(shape), std::move(v), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    std::int64_t dim(std::size_t i) const { return node_->shape[i]; }

    const std::vector<T>& values() const { return node_->values; }
    std::vector<T>& values() { return node_->values; }
    const std::vector<T>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape()));
        return node_->values[0];
    }

    // Detached copy: same values, fresh leaf, no gradient flow.
    TensorT detach() const {
        auto n = std::make_shared<Node>();
        n->shape = node_->shape;
        n->values = node_->values;
        n->requires_grad = false;
        return TensorT(std::move(n));
    }

    // Reverse pass from a scalar output. Builds the topological order of the
    // recorded tape (parents precede children) and runs each backward closure
    // exactly once.
    void backward() const {
        if (numel() != 1) throw ShapeError("backward() requires a scalar output");
        std::vector<Node*> order = topo_order();
        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward_fn && n->requires_grad) {
                for (auto& p : n->parents)
                    if (p->requires_grad) p->ensure_grad();
                n->backward_fn(*n);
            }
        }
    }

    // Clears gradients on every node reachable from this one (used between
    // repeated backwards over a shared forward graph).
    void zero_grad_graph() const {
        for (Node* n : topo_order()) std::fill(n->grad.begin(), n->grad.end(), T(0));
    }

    void zero_grad() const { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

    std::shared_ptr<Node> node() const { return node_; }

    // Graph-building helper used by the op layer.
    static TensorT make_op(Shape shape, std::vector<T> values, std::vector<TensorT> parents,
                           std::function<void(Node&)> backward_fn) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        for (auto& p : parents) {
            n->requires_grad = n->requires_grad || p.node_->requires_grad;
            n->parents.push_back(p.node_);
        }
        if (n->requires_grad) n->backward_fn = std::move(backward_fn);
        return TensorT(std::move(n));
    }

private:
    explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    std::vector<Node*> topo_order() const {
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        // Iterative DFS; stack entries carry the next parent index to visit.
        std::vector<std::pair<Node*, std::size_t>> stack;
        if (seen.insert(node_.get()).second) stack.emplace_back(node_.get(), 0);
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise primitives
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& n) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
    });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& n) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
    });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& n) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->values[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->values[i];
    });
}

template <typename T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "div");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            T inv = T(1) / bn->values[i];
            if (an->requires_grad) an->grad[i] += n.grad[i] * inv;
            if (bn->requires_grad) bn->grad[i] -= n.grad[i] * an->values[i] * inv * inv;
        }
    });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    auto an = a.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a}, [an, c](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * c;
    });
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T c) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
    auto an = a.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a}, [an](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
    });
}

// sqrt with subgradient 0 at zero (zero-patch limit).
template <typename T>
TensorT<T> sqrt_t(const TensorT<T>& a) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a.values()[i]);
    auto an = a.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a}, [an](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (n.values[i] > T(0)) an->grad[i] += n.grad[i] / (T(2) * n.values[i]);
        }
    });
}

// |x|^p with d/dx = p*|x|^(p-1)*sign(x); subgradient 0 at x == 0.
template <typename T>
TensorT<T> abs_pow(const TensorT<T>& a, T p) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(std::pow(std::abs(static_cast<double>(a.values()[i])), static_cast<double>(p)));
    auto an = a.node();
    return TensorT<T>::make_op(a.shape(), std::move(out), {a}, [an, p](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            T x = an->values[i];
            if (x == T(0)) continue;
            T d = p * static_cast<T>(std::pow(std::abs(static_cast<double>(x)), static_cast<double>(p - T(1))));
            an->grad[i] += n.grad[i] * (x > T(0) ? d : -d);
        }
    });
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& a) {
    T s = T(0);
    for (T v : a.values()) s += v;
    auto an = a.node();
    return TensorT<T>::make_op({1}, {s}, {a}, [an](auto& n) {
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += n.grad[0];
    });
}

// Scalar view of one element (used to seed per-class backwards).
template <typename T>
TensorT<T> select_scalar(const TensorT<T>& a, std::int64_t flat_index) {
    if (flat_index < 0 || flat_index >= a.numel())
        throw ShapeError("select_scalar: index " + std::to_string(flat_index) + " out of range");
    auto an = a.node();
    return TensorT<T>::make_op({1}, {a.values()[static_cast<std::size_t>(flat_index)]}, {a},
                               [an, flat_index](auto& n) {
                                   an->grad[static_cast<std::size_t>(flat_index)] += n.grad[0];
                               });
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto an = a.node();
    return TensorT<T>::make_op(std::move(shape), a.values(), {a}, [an](auto& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// conv2d: im2col + GEMM
// ---------------------------------------------------------------------------

namespace detail {

struct ConvDims {
    std::int64_t n, c, h, w;    // input
    std::int64_t k, kh, kw;     // kernel
    std::int64_t stride, pad;
    std::int64_t ho, wo;

    std::int64_t cols_rows() const { return c * kh * kw; }
    std::int64_t cols_cols() const { return ho * wo; }
};

template <typename T>
ConvDims conv_dims(const TensorT<T>& input, const TensorT<T>& kernel, std::int64_t stride,
                   std::int64_t pad) {
    if (input.shape().size() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
    if (kernel.shape().size() != 4) throw ShapeError("conv2d: kernel must be [K,C,kh,kw], got " + shape_str(kernel.shape()));
    if (stride <= 0) throw ShapeError("conv2d: stride must be positive");
    if (pad < 0) throw ShapeError("conv2d: padding must be non-negative");
    ConvDims d;
    d.n = input.dim(0); d.c = input.dim(1); d.h = input.dim(2); d.w = input.dim(3);
    d.k = kernel.dim(0); d.kh = kernel.dim(2); d.kw = kernel.dim(3);
    d.stride = stride; d.pad = pad;
    if (kernel.dim(1) != d.c)
        throw ShapeError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                         " do not match input channels " + std::to_string(d.c));
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
        throw ShapeError("conv2d: kernel larger than padded input");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

// Gathers patches of one batch item into [C*kh*kw, Ho*Wo] (zero padding).
template <typename T>
void im2col(const T* img, const ConvDims& d, T* cols) {
    const std::int64_t plane = d.h * d.w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < d.c; ++c) {
        for (std::int64_t ki = 0; ki < d.kh; ++ki) {
            for (std::int64_t kj = 0; kj < d.kw; ++kj, ++row) {
                T* dst = cols + row * d.cols_cols();
                for (std::int64_t oi = 0; oi < d.ho; ++oi) {
                    std::int64_t ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.h) {
                        std::fill(dst, dst + d.wo, T(0));
                        dst += d.wo;
                        continue;
                    }
                    const T* src = img + c * plane + ii * d.w - d.pad + kj;
                    for (std::int64_t oj = 0; oj < d.wo; ++oj) {
                        std::int64_t jj = oj * d.stride + kj - d.pad;
                        dst[oj] = (jj >= 0 && jj < d.w) ? src[oj * d.stride] : T(0);
                    }
                    dst += d.wo;
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
template <typename T>
void col2im_add(const T* cols, const ConvDims& d, T* img) {
    const std::int64_t plane = d.h * d.w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < d.c; ++c) {
        for (std::int64_t ki = 0; ki < d.kh; ++ki) {
            for (std::int64_t kj = 0; kj < d.kw; ++kj, ++row) {
                const T* src = cols + row * d.cols_cols();
                for (std::int64_t oi = 0; oi < d.ho; ++oi) {
                    std::int64_t ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.h) { src += d.wo; continue; }
                    for (std::int64_t oj = 0; oj < d.wo; ++oj) {
                        std::int64_t jj = oj * d.stride + kj - d.pad;
                        if (jj >= 0 && jj < d.w) img[c * plane + ii * d.w + jj] += src[oj];
                    }
                    src += d.wo;
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel, std::int64_t stride = 1,
                  std::int64_t padding = 0) {
    using namespace detail;
    ConvDims d = conv_dims(input, kernel, stride, padding);
    std::vector<T> out(static_cast<std::size_t>(d.n * d.k * d.ho * d.wo));
    std::vector<T> cols(static_cast<std::size_t>(d.cols_rows() * d.cols_cols()));
    ConstMapRM<T> wmat(kernel.values().data(), d.k, d.cols_rows());
    for (std::int64_t b = 0; b < d.n; ++b) {
        im2col(input.values().data() + b * d.c * d.h * d.w, d, cols.data());
        ConstMapRM<T> cmat(cols.data(), d.cols_rows(), d.cols_cols());
        MapRM<T> omat(out.data() + b * d.k * d.ho * d.wo, d.k, d.cols_cols());
        omat.noalias() = wmat * cmat;
    }

    auto in = input.node();
    auto kn = kernel.node();
    return TensorT<T>::make_op({d.n, d.k, d.ho, d.wo}, std::move(out), {input, kernel}, [in, kn, d](auto& n) {
        using namespace detail;
        std::vector<T> cols(static_cast<std::size_t>(d.cols_rows() * d.cols_cols()));
        ConstMapRM<T> wmat(kn->values.data(), d.k, d.cols_rows());
        for (std::int64_t b = 0; b < d.n; ++b) {
            ConstMapRM<T> gmat(n.grad.data() + b * d.k * d.ho * d.wo, d.k, d.cols_cols());
            if (kn->requires_grad) {
                im2col(in->values.data() + b * d.c * d.h * d.w, d, cols.data());
                ConstMapRM<T> cmat(cols.data(), d.cols_rows(), d.cols_cols());
                MapRM<T> gw(kn->grad.data(), d.k, d.cols_rows());
                gw.noalias() += gmat * cmat.transpose();
            }
            if (in->requires_grad) {
                MapRM<T> cmat(cols.data(), d.cols_rows(), d.cols_cols());
                cmat.noalias() = wmat.transpose() * gmat;
                col2im_add(cols.data(), d, in->grad.data() + b * d.c * d.h * d.w);
            }
        }
    });
}

// Per-patch sum of squares over channels: q[n,o,i,j] = sum over the (C,kh,kw)
// patch of x^2. Shared by every output unit, so the output has one channel
// replicated logically; we emit [N,1,Ho,Wo].
template <typename T>
TensorT<T> patch_sumsq(const TensorT<T>& input, std::int64_t kh, std::int64_t kw,
                       std::int64_t stride = 1, std::int64_t padding = 0) {
    using namespace detail;
    TensorT<T> ones = TensorT<T>::filled({1, input.dim(1), kh, kw}, T(1));
    ConvDims d = conv_dims(input, ones, stride, padding);
    std::vector<T> out(static_cast<std::size_t>(d.n * d.ho * d.wo), T(0));
    std::vector<T> cols(static_cast<std::size_t>(d.cols_rows() * d.cols_cols()));
    for (std::int64_t b = 0; b < d.n; ++b) {
        im2col(input.values().data() + b * d.c * d.h * d.w, d, cols.data());
        T* dst = out.data() + b * d.ho * d.wo;
        for (std::int64_t r = 0; r < d.cols_rows(); ++r) {
            const T* src = cols.data() + r * d.cols_cols();
            for (std::int64_t ocol = 0; ocol < d.cols_cols(); ++ocol) dst[ocol] += src[ocol] * src[ocol];
        }
    }
    auto in = input.node();
    return TensorT<T>::make_op({d.n, 1, d.ho, d.wo}, std::move(out), {input}, [in, d](auto& n) {
        // dq/dx = 2x over each patch membership: scatter g * 2x.
        using namespace detail;
        std::vector<T> cols(static_cast<std::size_t>(d.cols_rows() * d.cols_cols()));
        std::vector<T> gcols(cols.size());
        for (std::int64_t b = 0; b < d.n; ++b) {
            im2col(in->values.data() + b * d.c * d.h * d.w, d, cols.data());
            const T* g = n.grad.data() + b * d.ho * d.wo;
            for (std::int64_t r = 0; r < d.cols_rows(); ++r) {
                const T* xs = cols.data() + r * d.cols_cols();
                T* gd = gcols.data() + r * d.cols_cols();
                for (std::int64_t ocol = 0; ocol < d.cols_cols(); ++ocol) gd[ocol] = T(2) * xs[ocol] * g[ocol];
            }
            col2im_add(gcols.data(), d, in->grad.data() + b * d.c * d.h * d.w);
        }
    });
}

// Broadcast a [N,1,H,W] tensor across K channels (pairs with patch_sumsq).
template <typename T>
TensorT<T> broadcast_channel(const TensorT<T>& a, std::int64_t k) {
    if (a.shape().size() != 4 || a.dim(1) != 1)
        throw ShapeError("broadcast_channel: expected [N,1,H,W], got " + shape_str(a.shape()));
    const std::int64_t n = a.dim(0), hw = a.dim(2) * a.dim(3);
    std::vector<T> out(static_cast<std::size_t>(n * k * hw));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t c = 0; c < k; ++c)
            std::copy_n(a.values().data() + b * hw, hw, out.data() + (b * k + c) * hw);
    auto an = a.node();
    return TensorT<T>::make_op({n, k, a.dim(2), a.dim(3)}, std::move(out), {a}, [an, n, k, hw](auto& nd) {
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t c = 0; c < k; ++c) {
                const T* g = nd.grad.data() + (b * k + c) * hw;
                T* dst = an->grad.data() + b * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] += g[i];
            }
    });
}

// ---------------------------------------------------------------------------
// Structural ops used by the layer set
// ---------------------------------------------------------------------------

// Element-wise max over consecutive channel groups; ties route the gradient to
// the lower channel index.
template <typename T>
TensorT<T> maxout(const TensorT<T>& x, std::int64_t group = 2) {
    if (x.shape().size() != 4) throw ShapeError("maxout: expected [N,C,H,W]");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (group <= 0 || c % group != 0)
        throw ShapeError("maxout: channel count " + std::to_string(c) + " not divisible by group " +
                         std::to_string(group));
    const std::int64_t co = c / group, hw = h * w;
    std::vector<T> out(static_cast<std::size_t>(n * co * hw));
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out.size());
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t oc = 0; oc < co; ++oc)
            for (std::int64_t i = 0; i < hw; ++i) {
                T best = x.values()[(b * c + oc * group) * hw + i];
                std::int32_t bestg = 0;
                for (std::int64_t g = 1; g < group; ++g) {
                    T v = x.values()[(b * c + oc * group + g) * hw + i];
                    if (v > best) { best = v; bestg = static_cast<std::int32_t>(g); }
                }
                out[(b * co + oc) * hw + i] = best;
                (*argmax)[(b * co + oc) * hw + i] = bestg;
            }
    auto xn = x.node();
    return TensorT<T>::make_op({n, co, h, w}, std::move(out), {x}, [xn, argmax, n, c, co, group, hw](auto& nd) {
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t oc = 0; oc < co; ++oc)
                for (std::int64_t i = 0; i < hw; ++i) {
                    std::int64_t o = (b * co + oc) * hw + i;
                    std::int64_t src = (b * c + oc * group + (*argmax)[o]) * hw + i;
                    xn->grad[src] += nd.grad[o];
                }
    });
}

// Mean over spatial dims: [N,C,H,W] -> [N,C,1,1].
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
    if (x.shape().size() != 4) throw ShapeError("global_avg_pool: expected [N,C,H,W]");
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<T> out(static_cast<std::size_t>(n * c));
    for (std::int64_t i = 0; i < n * c; ++i) {
        T s = T(0);
        const T* src = x.values().data() + i * hw;
        for (std::int64_t j = 0; j < hw; ++j) s += src[j];
        out[i] = s / static_cast<T>(hw);
    }
    auto xn = x.node();
    return TensorT<T>::make_op({n, c, 1, 1}, std::move(out), {x}, [xn, n, c, hw](auto& nd) {
        for (std::int64_t i = 0; i < n * c; ++i) {
            T g = nd.grad[i] / static_cast<T>(hw);
            T* dst = xn->grad.data() + i * hw;
            for (std::int64_t j = 0; j < hw; ++j) dst[j] += g;
        }
    });
}

// Plain subsampling: every stride-th element starting at (0,0).
template <typename T>
TensorT<T> subsample2d(const TensorT<T>& x, std::int64_t stride) {
    if (x.shape().size() != 4) throw ShapeError("subsample2d: expected [N,C,H,W]");
    if (stride <= 0) throw ShapeError("subsample2d: stride must be positive");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
    std::vector<T> out(static_cast<std::size_t>(n * c * ho * wo));
    for (std::int64_t p = 0; p < n * c; ++p)
        for (std::int64_t i = 0; i < ho; ++i)
            for (std::int64_t j = 0; j < wo; ++j)
                out[(p * ho + i) * wo + j] = x.values()[(p * h + i * stride) * w + j * stride];
    auto xn = x.node();
    return TensorT<T>::make_op({n, c, ho, wo}, std::move(out), {x}, [xn, n, c, h, w, ho, wo, stride](auto& nd) {
        for (std::int64_t p = 0; p < n * c; ++p)
            for (std::int64_t i = 0; i < ho; ++i)
                for (std::int64_t j = 0; j < wo; ++j)
                    xn->grad[(p * h + i * stride) * w + j * stride] += nd.grad[(p * ho + i) * wo + j];
    });
}

// Per-row (output unit) L2 normalization of a [K,C,kh,kw] weight tensor.
template <typename T>
TensorT<T> unit_normalize_rows(const TensorT<T>& w) {
    if (w.shape().size() != 4) throw ShapeError("unit_normalize_rows: expected [K,C,kh,kw]");
    const std::int64_t k = w.dim(0), row = w.numel() / w.dim(0);
    std::vector<T> out(w.values().size());
    std::vector<T> norms(static_cast<std::size_t>(k));
    for (std::int64_t u = 0; u < k; ++u) {
        const T* src = w.values().data() + u * row;
        T s = T(0);
        for (std::int64_t i = 0; i < row; ++i) s += src[i] * src[i];
        T nrm = std::sqrt(s);
        norms[static_cast<std::size_t>(u)] = nrm;
        T inv = nrm > T(0) ? T(1) / nrm : T(0);
        for (std::int64_t i = 0; i < row; ++i) out[u * row + i] = src[i] * inv;
    }
    auto wn = w.node();
    return TensorT<T>::make_op(w.shape(), std::move(out), {w}, [wn, k, row, norms](auto& nd) {
        // d(w/|w|) = (I - u u^T)/|w| with u = w/|w|.
        for (std::int64_t u = 0; u < k; ++u) {
            T nrm = norms[static_cast<std::size_t>(u)];
            if (nrm <= T(0)) continue;
            const T* uv = nd.values.data() + u * row;
            const T* g = nd.grad.data() + u * row;
            T dot = T(0);
            for (std::int64_t i = 0; i < row; ++i) dot += uv[i] * g[i];
            T* dst = wn->grad.data() + u * row;
            for (std::int64_t i = 0; i < row; ++i) dst[i] += (g[i] - dot * uv[i]) / nrm;
        }
    });
}

// ---------------------------------------------------------------------------
// Losses (fused, numerically stable)
// ---------------------------------------------------------------------------

// Mean binary cross entropy with logits; targets are constants in [0,1].
template <typename T>
TensorT<T> bce_with_logits(const TensorT<T>& logits, const std::vector<T>& targets) {
    if (static_cast<std::int64_t>(targets.size()) != logits.numel())
        throw ShapeError("bce_with_logits: target length mismatch");
    const std::size_t m = targets.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double z = logits.values()[i], t = targets[i];
        acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    auto ln = logits.node();
    auto tg = std::make_shared<std::vector<T>>(targets);
    return TensorT<T>::make_op({1}, {static_cast<T>(acc / static_cast<double>(m))}, {logits}, [ln, tg, m](auto& nd) {
        T g = nd.grad[0] / static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i) {
            double z = ln->values[i];
            double sig = 1.0 / (1.0 + std::exp(-z));
            ln->grad[i] += g * static_cast<T>(sig - (*tg)[i]);
        }
    });
}

// Mean softmax cross entropy over [N,K] logits with integer class targets.
template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<std::int64_t>& targets) {
    if (logits.shape().size() != 2) throw ShapeError("softmax_cross_entropy: expected [N,K] logits");
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    if (static_cast<std::int64_t>(targets.size()) != n)
        throw ShapeError("softmax_cross_entropy: target length mismatch");
    double acc = 0.0;
    for (std::int64_t b = 0; b < n; ++b) {
        const T* z = logits.values().data() + b * k;
        double zmax = z[0];
        for (std::int64_t j = 1; j < k; ++j) zmax = std::max<double>(zmax, z[j]);
        double lse = 0.0;
        for (std::int64_t j = 0; j < k; ++j) lse += std::exp(z[j] - zmax);
        lse = zmax + std::log(lse);
        acc += lse - z[targets[static_cast<std::size_t>(b)]];
    }
    auto ln = logits.node();
    auto tg = std::make_shared<std::vector<std::int64_t>>(targets);
    return TensorT<T>::make_op({1}, {static_cast<T>(acc / static_cast<double>(n))}, {logits}, [ln, tg, n, k](auto& nd) {
        T g = nd.grad[0] / static_cast<T>(n);
        for (std::int64_t b = 0; b < n; ++b) {
            const T* z = ln->values.data() + b * k;
            double zmax = z[0];
            for (std::int64_t j = 1; j < k; ++j) zmax = std::max<double>(zmax, z[j]);
            double denom = 0.0;
            for (std::int64_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
            for (std::int64_t j = 0; j < k; ++j) {
                double p = std::exp(z[j] - zmax) / denom;
                double y = (j == (*tg)[static_cast<std::size_t>(b)]) ? 1.0 : 0.0;
                ln->grad[b * k + j] += g * static_cast<T>(p - y);
            }
        }
    });
}

}  // namespace aabcos

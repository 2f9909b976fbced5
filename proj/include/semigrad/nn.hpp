#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <utility>

#include "semigrad/tensor.hpp"

namespace semigrad {

struct Parameter {
    Tensor value;
    bool requires_grad = true;
    std::optional<Tensor> grad;
};

enum class LayerKind : std::uint8_t {
    Linear = 0,
    Conv2d = 1,
    ReLU = 2,
    MaxPool2d = 3,
    Flatten = 4,
};

// One layer of a sequential model. Linear and Conv2d carry parameters
// (params[0] = W, params[1] = b); the rest are parameter-free.
//
// Conv2d weights are stored as a (c_in*k*k) x c_out matrix so that the
// im2col forward is a plain matmul and its FLOP count reads off directly
// as 2*B*T*M with T = out_h*out_w and M = c_in*c_out*k*k.
struct Layer {
    LayerKind kind;
    std::vector<Parameter> params;

    // Linear
    std::size_t d_in = 0, d_out = 0;
    // Conv2d / MaxPool2d
    std::size_t c_in = 0, c_out = 0, ksize = 0, stride = 1, pad = 0;

    static Layer linear(std::size_t d_in, std::size_t d_out) {
        Layer l;
        l.kind = LayerKind::Linear;
        l.d_in = d_in;
        l.d_out = d_out;
        l.params.push_back({Tensor::zeros({d_in, d_out})});
        l.params.push_back({Tensor::zeros({d_out})});
        return l;
    }

    static Layer conv2d(std::size_t c_in, std::size_t c_out, std::size_t k,
                        std::size_t stride = 1, std::size_t pad = 0) {
        Layer l;
        l.kind = LayerKind::Conv2d;
        l.c_in = c_in;
        l.c_out = c_out;
        l.ksize = k;
        l.stride = stride;
        l.pad = pad;
        l.params.push_back({Tensor::zeros({c_in * k * k, c_out})});
        l.params.push_back({Tensor::zeros({c_out})});
        return l;
    }

    static Layer relu() {
        Layer l;
        l.kind = LayerKind::ReLU;
        return l;
    }

    static Layer maxpool2d(std::size_t k) {
        Layer l;
        l.kind = LayerKind::MaxPool2d;
        l.ksize = k;
        l.stride = k;
        return l;
    }

    static Layer flatten() {
        Layer l;
        l.kind = LayerKind::Flatten;
        return l;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.numel();
        return n;
    }
};

struct Model {
    std::vector<Layer> layers;

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
    }

    void init_random(Rng& rng, double stddev_scale = 1.0) {
        for (auto& l : layers) {
            if (l.params.empty()) continue;
            std::size_t fan_in = (l.kind == LayerKind::Linear) ? l.d_in
                                                               : l.c_in * l.ksize * l.ksize;
            double stddev = stddev_scale / std::sqrt(static_cast<double>(fan_in));
            l.params[0].value = rng.normal_tensor(l.params[0].value.shape, 0.0, stddev);
            // biases stay zero
        }
    }

    void zero_grad() {
        for (auto& l : layers)
            for (auto& p : l.params) p.grad.reset();
    }
};

// ---------------------------------------------------------------------------
// Linear kernels
// ---------------------------------------------------------------------------

// s = a W + b, row-wise over the batch
inline Tensor linear_forward(const Tensor& a, const Tensor& W, const Tensor& b) {
    if (a.cols() != W.rows())
        throw std::invalid_argument("linear_forward: input dim " + a.shape_str() +
                                    " does not match W " + W.shape_str());
    if (b.numel() != W.cols())
        throw std::invalid_argument("linear_forward: bias size mismatch");
    Tensor s = matmul(a, W);
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) += b.data[j];
    return s;
}

enum class Activation { Identity, ReLU };

// ds_l = (ds_{l+1} W_{l+1}^T) o phi'(s_l).  ReLU' at exactly 0 is 0.
inline Tensor output_grad(const Tensor& ds_next, const Tensor& W_next,
                          const Tensor& s, Activation phi) {
    Tensor ds = matmul_transB(ds_next, W_next);
    check_same_shape(ds, s, "output_grad");
    if (phi == Activation::ReLU) {
        for (std::size_t i = 0; i < ds.data.size(); ++i)
            if (s.data[i] <= 0.0) ds.data[i] = 0.0;
    }
    return ds;
}

// dW = a^T ds, db = ds summed over the batch
inline std::pair<Tensor, Tensor> param_grad(const Tensor& ds, const Tensor& a) {
    if (ds.rows() != a.rows())
        throw std::invalid_argument("param_grad: batch dims disagree " +
                                    ds.shape_str() + " vs " + a.shape_str());
    Tensor dW = matmul_transA(a, ds);
    Tensor db = Tensor::zeros({ds.cols()});
    for (std::size_t i = 0; i < ds.rows(); ++i)
        for (std::size_t j = 0; j < ds.cols(); ++j) db.data[j] += ds(i, j);
    return {std::move(dW), std::move(db)};
}

// dp = ds_1 W_1^T
inline Tensor input_grad(const Tensor& ds1, const Tensor& W1) {
    return matmul_transB(ds1, W1);
}

// ---------------------------------------------------------------------------
// Cross-entropy head
// ---------------------------------------------------------------------------

struct LossResult {
    double loss;
    Tensor dlogits;  // (softmax - onehot) / B
};

inline LossResult cross_entropy(const Tensor& logits,
                                const std::vector<std::size_t>& labels) {
    const std::size_t B = logits.rows(), C = logits.cols();
    if (labels.size() != B)
        throw std::invalid_argument("cross_entropy: label count != batch size");
    Tensor dlogits = Tensor::zeros({B, C});
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        if (labels[i] >= C)
            throw std::invalid_argument("cross_entropy: label " +
                                        std::to_string(labels[i]) +
                                        " out of range [0, " + std::to_string(C) + ")");
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, logits(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < C; ++j) denom += std::exp(logits(i, j) - mx);
        double log_denom = std::log(denom);
        total += log_denom - (logits(i, labels[i]) - mx);
        for (std::size_t j = 0; j < C; ++j) {
            double p = std::exp(logits(i, j) - mx) / denom;
            dlogits(i, j) = (p - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(B);
        }
    }
    double loss = total / static_cast<double>(B);
    if (!std::isfinite(loss))
        throw std::runtime_error("cross_entropy: non-finite loss");
    return {loss, std::move(dlogits)};
}

// ---------------------------------------------------------------------------
// Conv2d kernels (im2col)
// ---------------------------------------------------------------------------

inline std::size_t conv_out_dim(std::size_t n, std::size_t k, std::size_t stride,
                                std::size_t pad) {
    return (n + 2 * pad - k) / stride + 1;
}

// Expands input (B, C, H, W) into patches ((B*out_h*out_w) x (C*k*k)).
// Out-of-bounds positions under padding contribute zero.
inline Tensor im2col(const Tensor& input, std::size_t k, std::size_t stride,
                     std::size_t pad) {
    if (input.ndim() != 4)
        throw std::invalid_argument("im2col: expected 4-d input, got " +
                                    input.shape_str());
    const std::size_t B = input.shape[0], C = input.shape[1];
    const std::size_t H = input.shape[2], W = input.shape[3];
    const std::size_t oh = conv_out_dim(H, k, stride, pad);
    const std::size_t ow = conv_out_dim(W, k, stride, pad);
    Tensor patches = Tensor::zeros({B * oh * ow, C * k * k});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double* row = patches.data.data() +
                              ((b * oh + y) * ow + x) * (C * k * k);
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t dy = 0; dy < k; ++dy) {
                        const long iy = static_cast<long>(y * stride + dy) -
                                        static_cast<long>(pad);
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const long ix = static_cast<long>(x * stride + dx) -
                                            static_cast<long>(pad);
                            double v = 0.0;
                            if (iy >= 0 && iy < static_cast<long>(H) && ix >= 0 &&
                                ix < static_cast<long>(W))
                                v = input.data[((b * C + c) * H + iy) * W + ix];
                            row[(c * k + dy) * k + dx] = v;
                        }
                    }
                }
            }
        }
    }
    return patches;
}

// Scatter-add of patch gradients back to input layout; adjoint of im2col.
inline Tensor col2im(const Tensor& dpatches, std::size_t B, std::size_t C,
                     std::size_t H, std::size_t W, std::size_t k,
                     std::size_t stride, std::size_t pad) {
    const std::size_t oh = conv_out_dim(H, k, stride, pad);
    const std::size_t ow = conv_out_dim(W, k, stride, pad);
    Tensor dinput = Tensor::zeros({B, C, H, W});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double* row = dpatches.data.data() +
                                    ((b * oh + y) * ow + x) * (C * k * k);
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t dy = 0; dy < k; ++dy) {
                        const long iy = static_cast<long>(y * stride + dy) -
                                        static_cast<long>(pad);
                        if (iy < 0 || iy >= static_cast<long>(H)) continue;
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const long ix = static_cast<long>(x * stride + dx) -
                                            static_cast<long>(pad);
                            if (ix < 0 || ix >= static_cast<long>(W)) continue;
                            dinput.data[((b * C + c) * H + iy) * W + ix] +=
                                row[(c * k + dy) * k + dx];
                        }
                    }
                }
            }
        }
    }
    return dinput;
}

// Forward: patches (B*oh*ow x Ckk) times W (Ckk x c_out) plus bias, reshaped
// to (B, c_out, oh, ow).
inline Tensor conv2d_forward(const Tensor& input, const Tensor& W, const Tensor& b,
                             std::size_t c_out, std::size_t k, std::size_t stride,
                             std::size_t pad, Tensor* patches_out = nullptr) {
    const std::size_t B = input.shape[0];
    const std::size_t H = input.shape[2], Wd = input.shape[3];
    const std::size_t oh = conv_out_dim(H, k, stride, pad);
    const std::size_t ow = conv_out_dim(Wd, k, stride, pad);
    Tensor patches = im2col(input, k, stride, pad);
    Tensor s = matmul(patches, W);  // (B*oh*ow) x c_out
    for (std::size_t r = 0; r < s.rows(); ++r)
        for (std::size_t j = 0; j < c_out; ++j) s(r, j) += b.data[j];
    if (patches_out) *patches_out = std::move(patches);
    // reorder (B*oh*ow, c_out) -> (B, c_out, oh, ow)
    Tensor out = Tensor::zeros({B, c_out, oh, ow});
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t j = 0; j < c_out; ++j)
                    out.data[((bb * c_out + j) * oh + y) * ow + x] =
                        s((bb * oh + y) * ow + x, j);
    return out;
}

// (B, c_out, oh, ow) gradient -> row-major patch-rows layout (B*oh*ow, c_out)
inline Tensor conv_grad_to_rows(const Tensor& ds) {
    const std::size_t B = ds.shape[0], c_out = ds.shape[1];
    const std::size_t oh = ds.shape[2], ow = ds.shape[3];
    Tensor rows = Tensor::zeros({B * oh * ow, c_out});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < c_out; ++j)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x)
                    rows((b * oh + y) * ow + x, j) =
                        ds.data[((b * c_out + j) * oh + y) * ow + x];
    return rows;
}

// dW = patches^T ds_rows; db = column sums of ds_rows
inline std::pair<Tensor, Tensor> conv2d_param_grad(const Tensor& ds_rows,
                                                   const Tensor& patches) {
    return param_grad(ds_rows, patches);
}

// dinput = col2im(ds_rows W^T)
inline Tensor conv2d_input_grad(const Tensor& ds_rows, const Tensor& W,
                                std::size_t B, std::size_t C, std::size_t H,
                                std::size_t Wd, std::size_t k, std::size_t stride,
                                std::size_t pad) {
    Tensor dpatches = matmul_transB(ds_rows, W);
    return col2im(dpatches, B, C, H, Wd, k, stride, pad);
}

// ---------------------------------------------------------------------------
// Checkpoint IO: "SGCK", version u16, layer count u32, then per-layer
// kind tag + dims + little-endian f64 parameter blobs in model order.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline void write_tensor_blob(std::ostream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.bytes()));
}

inline void read_tensor_blob(std::istream& is, Tensor& t) {
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.bytes()));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter blob");
}

}  // namespace detail

inline void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    os.write("SGCK", 4);
    detail::write_raw<std::uint16_t>(os, 1);
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        detail::write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(l.kind));
        switch (l.kind) {
            case LayerKind::Linear:
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.d_in));
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.d_out));
                detail::write_tensor_blob(os, l.params[0].value);
                detail::write_tensor_blob(os, l.params[1].value);
                break;
            case LayerKind::Conv2d:
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.c_in));
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.c_out));
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.ksize));
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.stride));
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.pad));
                detail::write_tensor_blob(os, l.params[0].value);
                detail::write_tensor_blob(os, l.params[1].value);
                break;
            case LayerKind::MaxPool2d:
                detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(l.ksize));
                break;
            case LayerKind::ReLU:
            case LayerKind::Flatten:
                break;
        }
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SGCK", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    auto version = detail::read_raw<std::uint16_t>(is);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    auto count = detail::read_raw<std::uint32_t>(is);
    Model m;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto tag = detail::read_raw<std::uint8_t>(is);
        switch (static_cast<LayerKind>(tag)) {
            case LayerKind::Linear: {
                auto d_in = detail::read_raw<std::uint32_t>(is);
                auto d_out = detail::read_raw<std::uint32_t>(is);
                Layer l = Layer::linear(d_in, d_out);
                detail::read_tensor_blob(is, l.params[0].value);
                detail::read_tensor_blob(is, l.params[1].value);
                m.layers.push_back(std::move(l));
                break;
            }
            case LayerKind::Conv2d: {
                auto c_in = detail::read_raw<std::uint32_t>(is);
                auto c_out = detail::read_raw<std::uint32_t>(is);
                auto k = detail::read_raw<std::uint32_t>(is);
                auto stride = detail::read_raw<std::uint32_t>(is);
                auto pad = detail::read_raw<std::uint32_t>(is);
                Layer l = Layer::conv2d(c_in, c_out, k, stride, pad);
                detail::read_tensor_blob(is, l.params[0].value);
                detail::read_tensor_blob(is, l.params[1].value);
                m.layers.push_back(std::move(l));
                break;
            }
            case LayerKind::ReLU:
                m.layers.push_back(Layer::relu());
                break;
            case LayerKind::MaxPool2d: {
                auto k = detail::read_raw<std::uint32_t>(is);
                m.layers.push_back(Layer::maxpool2d(k));
                break;
            }
            case LayerKind::Flatten:
                m.layers.push_back(Layer::flatten());
                break;
            default:
                throw std::runtime_error("checkpoint: unknown layer tag " +
                                         std::to_string(tag));
        }
    }
    return m;
}

}  // namespace semigrad

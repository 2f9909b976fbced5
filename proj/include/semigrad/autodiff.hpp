#pragma once

#include <limits>

#include "semigrad/nn.hpp"

namespace semigrad {

// Full: backward computes output gradients, parameter gradients, and the
// input gradient. Semi: backward computes only the output-gradient chain
// down to the input gradient; parameter-gradient nodes are never created
// and their saved activations are never stored.
enum class GradMode { Full, Semi };

enum class Phase { ForwardOnly, BackwardOnly, Both };

// One forward op on the tape. param_record marks an attached
// parameter-gradient node; in Semi mode (or when the layer's parameters
// have requires_grad == false) no such node exists and saved_input stays
// empty.
struct OpRecord {
    std::size_t layer_index = 0;
    LayerKind kind;
    bool param_record = false;

    Tensor saved_input;   // a_l (Linear) or im2col patches (Conv2d); param node only
    Tensor saved_preact;  // ReLU input, kept for the output-gradient chain
    std::vector<std::size_t> in_shape;   // geometry for Conv2d/MaxPool2d/Flatten
    std::vector<std::size_t> out_shape;
    std::vector<std::size_t> argmax;     // MaxPool2d routing

    // analytic cost bookkeeping (MAC = 2 FLOPs)
    std::uint64_t dominant_fwd = 0;    // 2*B*T*M for parameterized layers
    std::uint64_t dominant_chain = 0;  // output/input-gradient matmul
    std::uint64_t dominant_param = 0;  // parameter-gradient matmul, 0 if pruned
    std::uint64_t lower_fwd = 0;
    std::uint64_t lower_bwd = 0;
    std::size_t saved_bytes = 0;
};

struct Tape {
    GradMode mode = GradMode::Full;
    std::vector<OpRecord> records;
    Tensor dlogits;
    double loss = 0.0;
    std::size_t batch = 0;
    std::size_t model_layer_count = 0;
    bool consumed = false;

    std::uint64_t loss_lower_flops = 0;
    std::size_t param_grad_bytes = 0;  // filled by backward
    std::size_t input_grad_bytes = 0;  // filled by backward

    std::size_t param_record_count() const {
        std::size_t n = 0;
        for (const auto& r : records) n += r.param_record ? 1 : 0;
        return n;
    }

    std::size_t saved_bytes() const {
        std::size_t n = 0;
        for (const auto& r : records) n += r.saved_bytes;
        return n;
    }
};

struct ForwardResult {
    double loss;
    Tape tape;
};

struct GradResult {
    Tensor input_grad;
    bool has_param_grads = false;
};

// Flips every parameter's requires-grad flag. Takes effect on the next
// forward: the tape built afterwards includes or omits parameter-gradient
// records accordingly.
inline void set_requires_grad(Model& model, bool flag) {
    for (auto& l : model.layers)
        for (auto& p : l.params) p.requires_grad = flag;
}

inline ForwardResult forward(Model& model, const Tensor& input,
                             const std::vector<std::size_t>& labels, GradMode mode) {
    Tape tape;
    tape.mode = mode;
    tape.model_layer_count = model.layers.size();
    if (input.ndim() < 2)
        throw std::invalid_argument("forward: input must have a batch dimension");
    const std::size_t B = input.shape[0];
    tape.batch = B;

    Tensor act = input;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        Layer& l = model.layers[li];
        OpRecord rec;
        rec.layer_index = li;
        rec.kind = l.kind;
        rec.param_record = mode == GradMode::Full && !l.params.empty() &&
                           l.params[0].requires_grad;
        rec.in_shape = act.shape;

        switch (l.kind) {
            case LayerKind::Linear: {
                if (act.ndim() != 2)
                    throw std::invalid_argument("forward: linear layer " +
                                                std::to_string(li) +
                                                " expects 2-d input, got " +
                                                act.shape_str());
                const std::uint64_t M =
                    static_cast<std::uint64_t>(l.d_in) * l.d_out;
                rec.dominant_fwd = 2 * B * M;
                rec.dominant_chain = 2 * B * M;
                rec.lower_fwd = B * l.d_out;  // bias adds
                if (rec.param_record) {
                    rec.dominant_param = 2 * B * M;
                    rec.lower_bwd = B * l.d_out;  // db column sums
                    rec.saved_input = act;
                    rec.saved_bytes += rec.saved_input.bytes();
                }
                act = linear_forward(act, l.params[0].value, l.params[1].value);
                break;
            }
            case LayerKind::Conv2d: {
                if (act.ndim() != 4 || act.shape[1] != l.c_in)
                    throw std::invalid_argument("forward: conv layer " +
                                                std::to_string(li) +
                                                " expects (B," +
                                                std::to_string(l.c_in) +
                                                ",H,W), got " + act.shape_str());
                const std::size_t oh =
                    conv_out_dim(act.shape[2], l.ksize, l.stride, l.pad);
                const std::size_t ow =
                    conv_out_dim(act.shape[3], l.ksize, l.stride, l.pad);
                const std::uint64_t T = static_cast<std::uint64_t>(oh) * ow;
                const std::uint64_t M = static_cast<std::uint64_t>(l.c_in) *
                                        l.c_out * l.ksize * l.ksize;
                rec.dominant_fwd = 2 * B * T * M;
                rec.dominant_chain = 2 * B * T * M;
                rec.lower_fwd = B * T * l.c_out;
                Tensor patches;
                act = conv2d_forward(act, l.params[0].value, l.params[1].value,
                                     l.c_out, l.ksize, l.stride, l.pad,
                                     rec.param_record ? &patches : nullptr);
                if (rec.param_record) {
                    rec.dominant_param = 2 * B * T * M;
                    rec.lower_bwd = B * T * l.c_out;
                    rec.saved_input = std::move(patches);
                    rec.saved_bytes += rec.saved_input.bytes();
                }
                break;
            }
            case LayerKind::ReLU: {
                rec.saved_preact = act;
                rec.saved_bytes += rec.saved_preact.bytes();
                rec.lower_fwd = act.numel();
                rec.lower_bwd = act.numel();
                for (double& v : act.data) v = v > 0.0 ? v : 0.0;
                break;
            }
            case LayerKind::MaxPool2d: {
                if (act.ndim() != 4)
                    throw std::invalid_argument("forward: maxpool expects 4-d input, got " +
                                                act.shape_str());
                const std::size_t C = act.shape[1], H = act.shape[2], W = act.shape[3];
                const std::size_t k = l.ksize;
                const std::size_t oh = H / k, ow = W / k;
                if (oh == 0 || ow == 0)
                    throw std::invalid_argument("forward: maxpool window larger than input");
                Tensor out = Tensor::zeros({B, C, oh, ow});
                rec.argmax.resize(B * C * oh * ow);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t y = 0; y < oh; ++y)
                            for (std::size_t x = 0; x < ow; ++x) {
                                double best = -std::numeric_limits<double>::infinity();
                                std::size_t best_idx = 0;
                                for (std::size_t dy = 0; dy < k; ++dy)
                                    for (std::size_t dx = 0; dx < k; ++dx) {
                                        std::size_t idx =
                                            ((b * C + c) * H + y * k + dy) * W +
                                            x * k + dx;
                                        // strict > keeps the first (row-major) max
                                        if (act.data[idx] > best) {
                                            best = act.data[idx];
                                            best_idx = idx;
                                        }
                                    }
                                std::size_t oidx = ((b * C + c) * oh + y) * ow + x;
                                out.data[oidx] = best;
                                rec.argmax[oidx] = best_idx;
                            }
                rec.lower_fwd = B * C * oh * ow * (k * k - 1);
                rec.lower_bwd = B * C * oh * ow;
                rec.saved_bytes += rec.argmax.size() * sizeof(std::size_t);
                act = std::move(out);
                break;
            }
            case LayerKind::Flatten: {
                std::size_t flat = act.numel() / B;
                act.shape = {B, flat};
                break;
            }
        }
        rec.out_shape = act.shape;
        tape.records.push_back(std::move(rec));
    }

    if (act.ndim() != 2)
        throw std::invalid_argument("forward: model output must be 2-d logits, got " +
                                    act.shape_str());
    LossResult lr = cross_entropy(act, labels);
    tape.loss = lr.loss;
    tape.dlogits = std::move(lr.dlogits);
    tape.loss_lower_flops = 5ULL * B * act.cols();
    return {tape.loss, std::move(tape)};
}

// Replays the tape in exact reverse order. The output-gradient chain is the
// same op sequence in both modes; parameter-gradient nodes, when present,
// write to separate buffers and never feed back into the chain.
inline GradResult backward(Model& model, Tape& tape) {
    if (tape.consumed)
        throw std::logic_error("backward: tape already consumed");
    if (tape.model_layer_count != model.layers.size())
        throw std::logic_error("backward: tape does not match model");
    tape.consumed = true;

    Tensor ds = tape.dlogits;
    bool any_param = false;
    tape.param_grad_bytes = 0;

    for (auto it = tape.records.rbegin(); it != tape.records.rend(); ++it) {
        OpRecord& rec = *it;
        Layer& l = model.layers[rec.layer_index];
        switch (rec.kind) {
            case LayerKind::Linear: {
                if (rec.param_record) {
                    auto [dW, db] = param_grad(ds, rec.saved_input);
                    tape.param_grad_bytes += dW.bytes() + db.bytes();
                    l.params[0].grad = std::move(dW);
                    l.params[1].grad = std::move(db);
                    any_param = true;
                } else {
                    l.params[0].grad.reset();
                    l.params[1].grad.reset();
                }
                ds = input_grad(ds, l.params[0].value);
                break;
            }
            case LayerKind::Conv2d: {
                Tensor rows = conv_grad_to_rows(ds);
                if (rec.param_record) {
                    auto [dW, db] = conv2d_param_grad(rows, rec.saved_input);
                    tape.param_grad_bytes += dW.bytes() + db.bytes();
                    l.params[0].grad = std::move(dW);
                    l.params[1].grad = std::move(db);
                    any_param = true;
                } else {
                    l.params[0].grad.reset();
                    l.params[1].grad.reset();
                }
                ds = conv2d_input_grad(rows, l.params[0].value, rec.in_shape[0],
                                       rec.in_shape[1], rec.in_shape[2],
                                       rec.in_shape[3], l.ksize, l.stride, l.pad);
                break;
            }
            case LayerKind::ReLU: {
                for (std::size_t i = 0; i < ds.data.size(); ++i)
                    if (rec.saved_preact.data[i] <= 0.0) ds.data[i] = 0.0;
                break;
            }
            case LayerKind::MaxPool2d: {
                Tensor dinput = Tensor::zeros(rec.in_shape);
                for (std::size_t i = 0; i < rec.argmax.size(); ++i)
                    dinput.data[rec.argmax[i]] += ds.data[i];
                ds = std::move(dinput);
                break;
            }
            case LayerKind::Flatten: {
                ds.shape = rec.in_shape;
                break;
            }
        }
    }

    tape.input_grad_bytes = ds.bytes();
    ensure_finite(ds, "backward input gradient");
    return {std::move(ds), any_param};
}

struct FlopBreakdown {
    std::uint64_t dominant = 0;
    std::uint64_t lower_order = 0;
};

inline FlopBreakdown flop_breakdown(const Tape& tape, Phase phase) {
    FlopBreakdown out;
    for (const auto& r : tape.records) {
        if (phase != Phase::BackwardOnly) {
            out.dominant += r.dominant_fwd;
            out.lower_order += r.lower_fwd;
        }
        if (phase != Phase::ForwardOnly) {
            out.dominant += r.dominant_chain + r.dominant_param;
            out.lower_order += r.lower_bwd;
        }
    }
    if (phase != Phase::BackwardOnly) out.lower_order += tape.loss_lower_flops;
    return out;
}

// Dominant-term FLOP total (MAC = 2 FLOPs). Bias/activation work is
// lower-order and reported separately via flop_breakdown.
inline std::uint64_t flop_count(const Tape& tape, Phase phase) {
    return flop_breakdown(tape, phase).dominant;
}

struct AllocReport {
    std::size_t peak_bytes = 0;
    std::size_t param_grad_bytes = 0;
};

// Byte accounting over the tape's lifetime: saved tensors retained for
// backward, plus gradient buffers materialized by backward.
inline AllocReport alloc_report(const Tape& tape) {
    AllocReport r;
    r.param_grad_bytes = tape.param_grad_bytes;
    r.peak_bytes = tape.saved_bytes() + tape.param_grad_bytes +
                   tape.input_grad_bytes + tape.dlogits.bytes();
    return r;
}

}  // namespace semigrad

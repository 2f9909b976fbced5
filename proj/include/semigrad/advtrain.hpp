#pragma once

#include "semigrad/attacks.hpp"

namespace semigrad {

struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.0;  // 0 = plain SGD
};

struct TrainConfig {
    AttackConfig attack;
    SgdConfig optimizer;
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    bool toggle_semi = true;       // false: attack runs in Full mode (A/B baseline)
    bool accumulate_image = false; // literal variant: carry x+p across iterations
};

struct IterationCost {
    std::uint64_t attack_flops = 0;
    std::uint64_t update_flops = 0;
    std::uint64_t wall_ns = 0;

    std::uint64_t total_flops() const { return attack_flops + update_flops; }
};

// Exact rational value of the per-iteration speedup (6K+6)/(4K+6).
struct Rational {
    std::uint64_t num;
    std::uint64_t den;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Rational theoretical_speedup(std::size_t K) {
    if (K < 1) throw std::invalid_argument("theoretical_speedup: K < 1");
    std::uint64_t n = 6 * static_cast<std::uint64_t>(K) + 6;
    std::uint64_t d = 4 * static_cast<std::uint64_t>(K) + 6;
    std::uint64_t a = n, b = d;
    while (b) { std::uint64_t t = a % b; a = b; b = t; }
    return {n / a, d / a};
}

class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}

    void step(Model& model) {
        std::size_t vi = 0;
        for (auto& l : model.layers) {
            for (auto& p : l.params) {
                if (!p.grad) { ++vi; continue; }
                if (cfg_.momentum != 0.0) {
                    if (velocity_.size() <= vi) velocity_.resize(vi + 1);
                    if (velocity_[vi].data.empty())
                        velocity_[vi] = Tensor::zeros(p.value.shape);
                    Tensor& v = velocity_[vi];
                    for (std::size_t i = 0; i < v.data.size(); ++i) {
                        v.data[i] = cfg_.momentum * v.data[i] + p.grad->data[i];
                        p.value.data[i] -= cfg_.lr * v.data[i];
                    }
                } else {
                    for (std::size_t i = 0; i < p.value.data.size(); ++i)
                        p.value.data[i] -= cfg_.lr * p.grad->data[i];
                }
                ++vi;
            }
        }
    }

private:
    SgdConfig cfg_;
    std::vector<Tensor> velocity_;
};

// One adversarial-training iteration: freeze parameter gradients, run the
// K-step attack, restore the flags exactly as saved, then a full
// forward/backward on the adversarial batch and an optimizer step.
// Parameters frozen before the call stay frozen after it.
inline IterationCost adv_train_step(Model& model, SgdOptimizer& opt,
                                    const Tensor& x,
                                    const std::vector<std::size_t>& labels,
                                    const TrainConfig& cfg,
                                    Tensor* adv_out = nullptr) {
    auto t0 = std::chrono::steady_clock::now();
    IterationCost cost;

    // Baseline (toggle_semi == false) leaves the flags alone and attacks in
    // Full mode, which is the cost the speedup is measured against.
    std::vector<bool> initial_flags;
    for (auto& l : model.layers)
        for (auto& p : l.params) {
            initial_flags.push_back(p.requires_grad);
            if (cfg.toggle_semi) p.requires_grad = false;
        }

    AttackConfig atk = cfg.attack;
    atk.mode = cfg.toggle_semi ? GradMode::Semi : GradMode::Full;
    AttackResult ar = pgd(model, x, labels, atk);
    cost.attack_flops = ar.cost.total_flops();

    std::size_t fi = 0;
    for (auto& l : model.layers)
        for (auto& p : l.params) p.requires_grad = initial_flags[fi++];

    ForwardResult fr = forward(model, ar.adversarial, labels, GradMode::Full);
    if (!std::isfinite(fr.loss))
        throw std::runtime_error("adv_train_step: non-finite training loss");
    backward(model, fr.tape);
    cost.update_flops = flop_count(fr.tape, Phase::Both);

    opt.step(model);
    model.zero_grad();

    if (adv_out) *adv_out = std::move(ar.adversarial);
    cost.wall_ns = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - t0)
            .count());
    return cost;
}

struct EpochCost {
    std::uint64_t flops = 0;
    std::uint64_t wall_ns = 0;
    double mean_loss = 0.0;
};

// One pass over (features, labels) in batches of cfg.batch_size. With
// accumulate_image set, each batch's adversarial example replaces the clean
// input for the next epoch, mirroring the accumulating loop variant.
inline EpochCost adv_train_epoch(Model& model, SgdOptimizer& opt, Tensor& features,
                                 const std::vector<std::size_t>& labels,
                                 const TrainConfig& cfg) {
    const std::size_t n = features.shape[0];
    const std::size_t dim = features.numel() / n;
    const std::size_t B = std::min(cfg.batch_size, n);
    EpochCost ec;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + B <= n; start += B) {
        std::vector<std::size_t> batch_shape = features.shape;
        batch_shape[0] = B;
        Tensor xb = Tensor::zeros(batch_shape);
        std::copy(features.data.begin() + start * dim,
                  features.data.begin() + (start + B) * dim, xb.data.begin());
        std::vector<std::size_t> yb(labels.begin() + start,
                                    labels.begin() + start + B);
        Tensor adv;
        IterationCost ic = adv_train_step(model, opt, xb, yb, cfg, &adv);
        if (cfg.accumulate_image)
            std::copy(adv.data.begin(), adv.data.end(),
                      features.data.begin() + start * dim);
        ec.flops += ic.total_flops();
        ec.wall_ns += ic.wall_ns;
        ForwardResult fr = forward(model, xb, yb, GradMode::Semi);
        ec.mean_loss += fr.loss;
        ++batches;
    }
    if (batches) ec.mean_loss /= static_cast<double>(batches);
    return ec;
}

}  // namespace semigrad

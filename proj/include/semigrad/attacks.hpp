#pragma once

#include <chrono>

#include "semigrad/autodiff.hpp"

namespace semigrad {

enum class StepRule { SignedGrad, RawGrad };
enum class InitPolicy { Zero, UniformRandom };

struct AttackConfig {
    double epsilon = 0.0;               // l-inf radius
    std::vector<double> eta;            // per-step sizes; single entry = constant
    std::size_t steps = 1;
    StepRule step_rule = StepRule::SignedGrad;
    InitPolicy init = InitPolicy::Zero;
    std::optional<std::pair<double, double>> clamp_range;  // valid data range
    GradMode mode = GradMode::Semi;
    std::uint64_t seed = 0;  // used only for UniformRandom init

    double step_size(std::size_t k) const {
        if (eta.empty()) throw std::invalid_argument("attack: empty step schedule");
        return eta.size() == 1 ? eta[0] : eta.at(k);
    }

    void validate() const {
        if (epsilon < 0.0) throw std::invalid_argument("attack: epsilon < 0");
        if (steps < 1) throw std::invalid_argument("attack: steps < 1");
        if (eta.empty()) throw std::invalid_argument("attack: empty step schedule");
        for (double e : eta)
            if (e <= 0.0) throw std::invalid_argument("attack: step size <= 0");
        if (eta.size() != 1 && eta.size() < steps)
            throw std::invalid_argument("attack: step schedule shorter than steps");
    }

    static AttackConfig pgd_default(double epsilon, std::size_t steps,
                                    GradMode mode = GradMode::Semi) {
        AttackConfig c;
        c.epsilon = epsilon;
        c.steps = steps;
        c.eta = {steps > 1 ? epsilon / 4.0 : epsilon};
        c.mode = mode;
        c.clamp_range = {{0.0, 1.0}};
        return c;
    }
};

struct CostReport {
    std::uint64_t forward_flops = 0;
    std::uint64_t backward_flops = 0;
    std::uint64_t lower_order_flops = 0;
    std::size_t peak_bytes = 0;
    std::size_t param_grad_bytes = 0;
    std::uint64_t wall_ns = 0;

    std::uint64_t total_flops() const { return forward_flops + backward_flops; }
};

struct AttackResult {
    Tensor perturbation;
    Tensor adversarial;
    std::vector<double> loss_trace;
    CostReport cost;
};

// Exact l-inf metric projection onto the epsilon ball: elementwise clamp.
inline Tensor project_linf(const Tensor& p, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("project_linf: epsilon < 0");
    return clamp(p, -epsilon, epsilon);
}

// K steps of: forward on x+p, backward for the input gradient, ascent step,
// projection onto the l-inf ball, optional clamp of x+p into the valid
// data range. Gradient mode changes only the cost report, never the result.
inline AttackResult pgd(Model& model, const Tensor& x,
                        const std::vector<std::size_t>& labels,
                        const AttackConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();

    Tensor p;
    if (cfg.init == InitPolicy::UniformRandom && cfg.epsilon > 0.0) {
        Rng rng(cfg.seed);
        p = rng.uniform_tensor(x.shape, -cfg.epsilon, cfg.epsilon);
    } else {
        p = Tensor::zeros(x.shape);
    }
    if (cfg.clamp_range) {
        Tensor adv = clamp(add(x, p), cfg.clamp_range->first, cfg.clamp_range->second);
        p = sub(adv, x);
    }

    AttackResult res;
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        Tensor adv = add(x, p);
        ForwardResult fr = forward(model, adv, labels, cfg.mode);
        if (!std::isfinite(fr.loss))
            throw std::runtime_error("attack: non-finite loss at step " +
                                     std::to_string(k));
        res.loss_trace.push_back(fr.loss);
        GradResult gr = backward(model, fr.tape);

        FlopBreakdown fwd = flop_breakdown(fr.tape, Phase::ForwardOnly);
        FlopBreakdown bwd = flop_breakdown(fr.tape, Phase::BackwardOnly);
        res.cost.forward_flops += fwd.dominant;
        res.cost.backward_flops += bwd.dominant;
        res.cost.lower_order_flops += fwd.lower_order + bwd.lower_order;
        AllocReport ar = alloc_report(fr.tape);
        res.cost.peak_bytes = std::max(res.cost.peak_bytes, ar.peak_bytes);
        res.cost.param_grad_bytes =
            std::max(res.cost.param_grad_bytes, ar.param_grad_bytes);

        double eta = cfg.step_size(k);
        const Tensor step = cfg.step_rule == StepRule::SignedGrad
                                ? sign(gr.input_grad)
                                : gr.input_grad;
        for (std::size_t i = 0; i < p.data.size(); ++i)
            p.data[i] += eta * step.data[i];
        p = project_linf(p, cfg.epsilon);
        if (cfg.clamp_range) {
            Tensor clamped =
                clamp(add(x, p), cfg.clamp_range->first, cfg.clamp_range->second);
            p = sub(clamped, x);
        }
    }

    res.perturbation = std::move(p);
    res.adversarial = add(x, res.perturbation);
    res.cost.wall_ns = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - t0)
            .count());
    return res;
}

// Single signed-gradient step of size epsilon.
inline AttackResult fgsm(Model& model, const Tensor& x,
                         const std::vector<std::size_t>& labels, double epsilon,
                         GradMode mode = GradMode::Semi,
                         std::optional<std::pair<double, double>> clamp_range =
                             std::pair<double, double>{0.0, 1.0}) {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.steps = 1;
    cfg.eta = {epsilon > 0.0 ? epsilon : 1.0};  // eta unused when epsilon == 0
    cfg.step_rule = StepRule::SignedGrad;
    cfg.init = InitPolicy::Zero;
    cfg.clamp_range = clamp_range;
    cfg.mode = mode;
    if (epsilon == 0.0) {
        // degenerate radius: still run the forward for the loss trace
        AttackResult res = pgd(model, x, labels, cfg);
        res.perturbation = Tensor::zeros(x.shape);
        res.adversarial = x;
        return res;
    }
    return pgd(model, x, labels, cfg);
}

// BIM is PGD with zero init and signed steps.
inline AttackResult bim(Model& model, const Tensor& x,
                        const std::vector<std::size_t>& labels, AttackConfig cfg) {
    cfg.init = InitPolicy::Zero;
    cfg.step_rule = StepRule::SignedGrad;
    return pgd(model, x, labels, cfg);
}

}  // namespace semigrad

#include <gtest/gtest.h>

#include <semigrad/attacks.hpp>

#include "test_models.hpp"

using namespace semigrad;
namespace sgt = semigrad::testing;

TEST(ProjectLinf, Saturates) {
    Tensor p({2}, {0.5, -0.9});
    Tensor r = project_linf(p, 0.3);
    EXPECT_DOUBLE_EQ(r.data[0], 0.3);
    EXPECT_DOUBLE_EQ(r.data[1], -0.3);
}

TEST(ProjectLinf, FeasiblePointsUnchangedAndIdempotent) {
    Rng rng(1);
    Tensor p = rng.uniform_tensor({16}, -0.2, 0.2);
    Tensor once = project_linf(p, 0.25);
    EXPECT_TRUE(bitwise_equal(once, p));
    Tensor wild = rng.uniform_tensor({16}, -5, 5);
    Tensor p1 = project_linf(wild, 0.25);
    Tensor p2 = project_linf(p1, 0.25);
    EXPECT_TRUE(bitwise_equal(p1, p2));
}

namespace {

AttackConfig basic_cfg(double eps, std::size_t steps, GradMode mode) {
    AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.steps = steps;
    cfg.eta = {steps > 1 ? eps / 4.0 : eps};
    cfg.mode = mode;
    cfg.clamp_range = {{0.0, 1.0}};
    return cfg;
}

}  // namespace

TEST(Pgd, SingleSignedStepCollapsesToFgsm) {
    sgt::Instance inst = sgt::random_instance(0);
    AttackConfig cfg = basic_cfg(0.1, 1, GradMode::Semi);
    AttackResult via_pgd = pgd(inst.model, inst.x, inst.labels, cfg);
    AttackResult via_fgsm = fgsm(inst.model, inst.x, inst.labels, 0.1);
    EXPECT_TRUE(bitwise_equal(via_pgd.perturbation, via_fgsm.perturbation));
    EXPECT_TRUE(bitwise_equal(via_pgd.adversarial, via_fgsm.adversarial));
}

// Linear-softmax on 2-d input: the input gradient keeps the fixed direction
// sign(w1 - w0) for label 0, so enough signed steps saturate the ball.
TEST(Pgd, LinearModelReachesClosedFormCorner) {
    Model m;
    m.layers.push_back(Layer::linear(2, 2));
    m.layers[0].params[0].value = Tensor({2, 2}, {1.0, -0.5,
                                                  -2.0, 1.5});
    Tensor x({1, 2}, {0.5, 0.5});
    std::vector<std::size_t> y = {0};

    AttackConfig cfg;
    cfg.epsilon = 0.2;
    cfg.steps = 8;
    cfg.eta = {0.05};
    cfg.clamp_range.reset();  // keep the closed form exact
    cfg.mode = GradMode::Semi;
    AttackResult res = pgd(m, x, y, cfg);

    // column difference w1 - w0 per input coordinate
    const Tensor& W = m.layers[0].params[0].value;
    for (std::size_t i = 0; i < 2; ++i) {
        double dir = W(i, 1) - W(i, 0);
        EXPECT_DOUBLE_EQ(res.perturbation.data[i],
                         0.2 * (dir > 0 ? 1.0 : -1.0));
    }
    for (std::size_t k = 1; k < res.loss_trace.size(); ++k)
        EXPECT_GE(res.loss_trace[k], res.loss_trace[k - 1]);
}

TEST(Pgd, RawGradAscentIsMonotoneOnLinearSoftmax) {
    Rng rng(33);
    Model m;
    m.layers.push_back(Layer::linear(4, 3));
    m.init_random(rng);
    Tensor x = rng.uniform_tensor({2, 4}, 0, 1);
    std::vector<std::size_t> y = {0, 2};

    AttackConfig cfg;
    cfg.epsilon = 0.5;
    cfg.steps = 20;
    cfg.eta = {0.05};
    cfg.step_rule = StepRule::RawGrad;
    cfg.clamp_range.reset();
    cfg.mode = GradMode::Semi;
    AttackResult res = pgd(m, x, y, cfg);
    for (std::size_t k = 1; k < res.loss_trace.size(); ++k)
        EXPECT_GE(res.loss_trace[k], res.loss_trace[k - 1] - 1e-12);
}

TEST(Pgd, SemiAndFullAgreeBitwiseWithHalvedBackwardFlops) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        sgt::Instance inst = sgt::random_instance(seed);
        AttackConfig full_cfg = basic_cfg(0.08, 5, GradMode::Full);
        AttackConfig semi_cfg = basic_cfg(0.08, 5, GradMode::Semi);
        AttackResult rf = pgd(inst.model, inst.x, inst.labels, full_cfg);
        AttackResult rs = pgd(inst.model, inst.x, inst.labels, semi_cfg);
        EXPECT_TRUE(bitwise_equal(rf.perturbation, rs.perturbation)) << seed;
        ASSERT_EQ(rf.loss_trace.size(), rs.loss_trace.size());
        for (std::size_t k = 0; k < rf.loss_trace.size(); ++k)
            EXPECT_EQ(std::memcmp(&rf.loss_trace[k], &rs.loss_trace[k],
                                  sizeof(double)),
                      0);
        EXPECT_EQ(rf.cost.backward_flops, 2 * rs.cost.backward_flops);
        EXPECT_EQ(rf.cost.forward_flops, rs.cost.forward_flops);
    }
}

TEST(Pgd, FeasibleAfterEveryStep) {
    // determinism makes the K-step prefix equal to a K-step run, so checking
    // final states across K covers every intermediate step
    sgt::Instance inst = sgt::random_instance(12);
    for (std::size_t k = 1; k <= 6; ++k) {
        AttackConfig cfg = basic_cfg(0.07, k, GradMode::Semi);
        AttackResult res = pgd(inst.model, inst.x, inst.labels, cfg);
        EXPECT_LE(linf_norm(res.perturbation), 0.07 * (1 + 1e-15));
        for (double v : res.adversarial.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Pgd, RandomInitIsSeededAndFeasible) {
    sgt::Instance inst = sgt::random_instance(14);
    AttackConfig cfg = basic_cfg(0.1, 3, GradMode::Semi);
    cfg.init = InitPolicy::UniformRandom;
    cfg.seed = 99;
    AttackResult a = pgd(inst.model, inst.x, inst.labels, cfg);
    AttackResult b = pgd(inst.model, inst.x, inst.labels, cfg);
    EXPECT_TRUE(bitwise_equal(a.perturbation, b.perturbation));
    EXPECT_LE(linf_norm(a.perturbation), 0.1 * (1 + 1e-15));
}

TEST(Pgd, InvalidConfigRejected) {
    sgt::Instance inst = sgt::random_instance(1);
    AttackConfig cfg = basic_cfg(0.1, 3, GradMode::Semi);
    cfg.epsilon = -1;
    EXPECT_THROW(pgd(inst.model, inst.x, inst.labels, cfg), std::invalid_argument);
    cfg = basic_cfg(0.1, 3, GradMode::Semi);
    cfg.steps = 0;
    EXPECT_THROW(pgd(inst.model, inst.x, inst.labels, cfg), std::invalid_argument);
    cfg = basic_cfg(0.1, 3, GradMode::Semi);
    cfg.eta = {-0.5};
    EXPECT_THROW(pgd(inst.model, inst.x, inst.labels, cfg), std::invalid_argument);
}

TEST(Pgd, NonFiniteLossAborts) {
    sgt::Instance inst = sgt::random_instance(0);
    inst.model.layers[0].params[0].value.data[0] =
        std::numeric_limits<double>::quiet_NaN();
    AttackConfig cfg = basic_cfg(0.1, 3, GradMode::Semi);
    EXPECT_THROW(pgd(inst.model, inst.x, inst.labels, cfg), std::runtime_error);
}

TEST(Fgsm, ZeroRadiusLeavesInputUntouched) {
    sgt::Instance inst = sgt::random_instance(2);
    AttackResult res = fgsm(inst.model, inst.x, inst.labels, 0.0);
    EXPECT_EQ(linf_norm(res.perturbation), 0.0);
    EXPECT_TRUE(bitwise_equal(res.adversarial, inst.x));
}

TEST(Fgsm, LinearModelMatchesClosedForm) {
    Model m;
    m.layers.push_back(Layer::linear(3, 2));
    m.layers[0].params[0].value = Tensor({3, 2}, {0.5, -1.0,
                                                  2.0, 0.25,
                                                  -0.75, -0.5});
    Tensor x({1, 3}, {0.5, 0.5, 0.5});
    std::vector<std::size_t> y = {1};
    AttackResult res = fgsm(m, x, y, 0.1, GradMode::Semi, std::nullopt);
    const Tensor& W = m.layers[0].params[0].value;
    for (std::size_t i = 0; i < 3; ++i) {
        double dir = W(i, 0) - W(i, 1);  // ascent direction for label 1
        EXPECT_DOUBLE_EQ(res.perturbation.data[i], 0.1 * (dir > 0 ? 1.0 : -1.0));
    }
}

TEST(Fgsm, IncreasesLossOnNearlyAllRandomInstances) {
    std::size_t increased = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        sgt::Instance inst = sgt::random_instance(seed);
        double clean = forward(inst.model, inst.x, inst.labels, GradMode::Semi).loss;
        AttackResult res = fgsm(inst.model, inst.x, inst.labels, 0.05);
        double adv =
            forward(inst.model, res.adversarial, inst.labels, GradMode::Semi).loss;
        increased += adv >= clean ? 1 : 0;
        ++total;
    }
    EXPECT_GE(increased * 100, total * 95);
}

TEST(Bim, IsPgdWithZeroInitAndSignedSteps) {
    sgt::Instance inst = sgt::random_instance(3);
    AttackConfig cfg = basic_cfg(0.06, 4, GradMode::Semi);
    // bim overrides whatever init/rule the caller set
    AttackConfig dirty = cfg;
    dirty.init = InitPolicy::UniformRandom;
    dirty.step_rule = StepRule::RawGrad;
    AttackResult via_bim = bim(inst.model, inst.x, inst.labels, dirty);
    AttackResult via_pgd = pgd(inst.model, inst.x, inst.labels, cfg);
    EXPECT_TRUE(bitwise_equal(via_bim.perturbation, via_pgd.perturbation));
    EXPECT_EQ(via_bim.loss_trace, via_pgd.loss_trace);
}

TEST(Bim, SingleStepEqualsFgsmWithEtaEqualEps) {
    sgt::Instance inst = sgt::random_instance(5);
    AttackConfig cfg = basic_cfg(0.09, 1, GradMode::Semi);
    AttackResult via_bim = bim(inst.model, inst.x, inst.labels, cfg);
    AttackResult via_fgsm = fgsm(inst.model, inst.x, inst.labels, 0.09);
    EXPECT_TRUE(bitwise_equal(via_bim.perturbation, via_fgsm.perturbation));
}

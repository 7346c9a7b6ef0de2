#include "atl/at_loss.hpp"
#include "atl/gradcheck.hpp"
#include "atl/model_zoo.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace atl;
using atl::test::random_tensor;

TEST(Gradcheck, QuadraticIsExact) {
    const std::vector<double> theta = {0.3, -1.7, 2.2, 1e-3};
    auto f = [](std::span<const double> p) {
        double s = 0;
        for (double v : p) s += 0.5 * v * v;
        return s;
    };
    const auto rep = gradcheck(f, theta, theta);
    EXPECT_TRUE(rep.passed);
    EXPECT_LT(rep.max_rel_error, 1e-8);
    EXPECT_EQ(rep.checked, 4u);
}

TEST(Gradcheck, DetectsWrongGradient) {
    const std::vector<double> theta = {1.0, 2.0};
    auto f = [](std::span<const double> p) { return p[0] * p[1]; };
    const std::vector<double> wrong = {2.0, 2.0};  // d/dp0 should be 2, d/dp1 should be 1
    const auto rep = gradcheck(f, theta, wrong);
    EXPECT_FALSE(rep.passed);
    EXPECT_EQ(rep.worst_index, 1u);
    EXPECT_NEAR(rep.worst_numeric, 1.0, 1e-8);
}

TEST(Gradcheck, RelativeErrorUsesFloor) {
    EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0, 1e-7), 0.0);
    EXPECT_NEAR(relative_error(1e-9, 0.0, 1e-7), 1e-2, 1e-15);
    EXPECT_NEAR(relative_error(2.0, 1.0, 1e-7), 0.5, 1e-15);
}

TEST(Gradcheck, KinkIsRefinedOrSkipped) {
    // |x| at x = 0 has no derivative; the signature marks the branch.
    const std::vector<double> at_kink = {0.0};
    auto f = [](std::span<const double> p) { return std::abs(p[0]); };
    auto sig = [](std::span<const double> p) { return static_cast<std::uint64_t>(p[0] > 0); };
    const std::vector<double> analytic = {1.0};
    const auto rep = gradcheck(f, at_kink, analytic, {}, sig);
    EXPECT_EQ(rep.skipped, 1u);
    EXPECT_TRUE(rep.passed);
    // close to (but not at) the kink the refined step recovers the slope
    const std::vector<double> near = {3e-6};
    const auto rep2 = gradcheck(f, near, analytic, {}, sig);
    EXPECT_EQ(rep2.skipped, 0u);
    EXPECT_TRUE(rep2.passed);
}

TEST(Gradcheck, SoftmaxCrossEntropyThreeClasses) {
    Rng rng(4);
    const Tensor logits = random_tensor({2, 3}, rng, -2, 2);
    const std::vector<int> labels = {2, 0};
    const auto ce = softmax_cross_entropy(logits, labels);
    const auto rep = gradcheck(
        [&](std::span<const double> p) {
            Tensor t(logits.shape());
            std::copy(p.begin(), p.end(), t.data());
            return softmax_cross_entropy(t, labels).loss;
        },
        logits.values(), ce.grad_logits.values());
    EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(Gradcheck, AtLossThroughTwoLayerToyNet) {
    // L_AT w.r.t. conv weights of a 2-conv net, h = 1e-5.
    PresetOptions o;
    o.input_shape = {1, 6, 6};
    o.num_classes = 2;
    o.conv_layers = 2;
    o.hidden_units = 3;
    const ArchConfig arch = vgg_tiny(o);
    Network net = build(arch, 1);
    const Network pre = build(arch, 2);
    Rng rng(3);
    const Tensor x = random_tensor({2, 1, 6, 6}, rng);
    ATConfig cfg;
    cfg.layers = {2};
    const Tensor fp = extract_features(pre, x, {2}).at(2);

    Parameter& w = net.parameter("conv1.weight");
    auto f = [&](std::span<const double> p) {
        std::copy(p.begin(), p.end(), w.value.data());
        ForwardOptions fo;
        fo.taps = {2};
        return at_loss(net.forward(x, fo).taps.at(2), fp, cfg).value;
    };
    const Tensor w0 = w.value;
    Tape tape;
    ForwardOptions fo;
    fo.taps = {2};
    fo.tape = &tape;
    const auto fwd = net.forward(x, fo);
    const auto term = at_loss(fwd.taps.at(2), fp, cfg);
    net.zero_grad();
    net.backward(tape, Tensor(fwd.output.shape()), {{2, term.grad_trained}});
    const Tensor analytic = w.grad;
    const auto rep = gradcheck(f, w0.values(), analytic.values(), {}, [&](std::span<const double> p) {
        std::copy(p.begin(), p.end(), w.value.data());
        Tape t;
        ForwardOptions o2;
        o2.tape = &t;
        net.forward(x, o2);
        return t.signature();
    });
    EXPECT_TRUE(rep.passed) << rep.max_rel_error;
    EXPECT_LT(rep.max_rel_error, 1e-4);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgcr/nn.hpp"
#include "pgcr/oracles.hpp"

using namespace pgcr;

namespace {

MlpD identity_net(int dim, int depth) {
    MlpD net;
    for (int i = 0; i < depth; ++i)
        net.layers.push_back({Mat::Identity(dim, dim), Vec::Zero(dim), Activation::Identity});
    return net;
}

/// Straightforward per-sample loop evaluation, sharing nothing with
/// forward_batch's matrix path.
Vec naive_forward(const MlpD& net, Vec x) {
    for (const auto& l : net.layers) {
        Vec z = l.b;
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) z[r] += l.w(r, c) * x[c];
        for (Eigen::Index r = 0; r < z.size(); ++r) {
            switch (l.act) {
                case Activation::Identity: break;
                case Activation::Relu: z[r] = std::max(0.0, z[r]); break;
                case Activation::Tanh: z[r] = std::tanh(z[r]); break;
            }
        }
        x = z;
    }
    return x;
}

MlpD random_net(Rng& rng, std::vector<int> sizes, Activation hidden, Activation output) {
    return MlpD::make(sizes, hidden, output, rng);
}

}  // namespace

TEST_CASE("identity network passes inputs through") {
    Rng rng(1);
    const MlpD net = identity_net(4, 3);
    const Vec x = rng.normal_vec(4);
    CHECK((forward(net, x) - x).norm() == 0.0);
}

TEST_CASE("zero weights expose the activated bias") {
    MlpD net;
    net.layers.push_back({Mat::Zero(2, 3), (Vec(2) << -1.0, 2.0).finished(), Activation::Tanh});
    const Vec y = forward(net, Vec::Ones(3));
    CHECK(y[0] == doctest::Approx(std::tanh(-1.0)));
    CHECK(y[1] == doctest::Approx(std::tanh(2.0)));
}

TEST_CASE("batched forward matches a naive reimplementation") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<Activation> acts = {Activation::Relu, Activation::Tanh,
                                              Activation::Identity};
        const MlpD net = random_net(rng, {3, 7, 5, 2}, acts[trial % 3], acts[(trial + 1) % 3]);
        Mat x(3, 4);
        for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
        const Mat y = forward_batch(net, x);
        for (int col = 0; col < 4; ++col)
            CHECK((y.col(col) - naive_forward(net, x.col(col))).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("forward rejects shape mismatches") {
    Rng rng(5);
    const MlpD net = random_net(rng, {3, 4, 2}, Activation::Relu, Activation::Identity);
    CHECK_THROWS_AS(forward(net, Vec::Zero(5)), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(90125);
    int checked = 0;
    while (checked < 8) {
        std::vector<int> sizes = {1 + rng.uniform_int(5)};
        const int depth = 1 + rng.uniform_int(3);
        for (int i = 0; i < depth; ++i) sizes.push_back(1 + rng.uniform_int(16));
        sizes.push_back(1 + rng.uniform_int(4));
        const Activation hidden = (checked % 2 == 0) ? Activation::Tanh : Activation::Relu;
        const MlpD net = random_net(rng, sizes, hidden, Activation::Identity);

        Mat x(sizes.front(), 3);
        for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();

        if (hidden == Activation::Relu) {
            // keep all preactivations away from the relu kink, where the
            // finite-difference stencil straddles the nondifferentiable point
            ForwardCacheD cache;
            forward_batch(net, x, &cache);
            bool near_kink = false;
            for (const auto& z : cache.preact)
                if ((z.cwiseAbs().array() < 1e-3).any()) near_kink = true;
            if (near_kink) continue;
        }

        Mat upstream(sizes.back(), 3);
        for (Eigen::Index k = 0; k < upstream.size(); ++k) upstream.data()[k] = rng.normal();

        ForwardCacheD cache;
        forward_batch(net, x, &cache);
        const GradientsD analytic = backward(net, cache, upstream);
        const GradientsD fd = oracle::fd_gradients(net, x, upstream);

        auto rel_err = [](double a, double b) {
            return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
        };
        for (std::size_t li = 0; li < analytic.w.size(); ++li) {
            for (Eigen::Index k = 0; k < analytic.w[li].size(); ++k)
                CHECK(rel_err(analytic.w[li].data()[k], fd.w[li].data()[k]) < 1e-4);
            for (Eigen::Index k = 0; k < analytic.b[li].size(); ++k)
                CHECK(rel_err(analytic.b[li][k], fd.b[li][k]) < 1e-4);
        }
        for (Eigen::Index k = 0; k < analytic.input.size(); ++k)
            CHECK(rel_err(analytic.input.data()[k], fd.input.data()[k]) < 1e-4);
        ++checked;
    }
}

TEST_CASE("zero upstream yields zero gradients") {
    Rng rng(42);
    const MlpD net = random_net(rng, {4, 8, 3}, Activation::Tanh, Activation::Identity);
    ForwardCacheD cache;
    forward_batch(net, Mat::Random(4, 5), &cache);
    const GradientsD g = backward(net, cache, Mat::Zero(3, 5));
    for (const auto& m : g.w) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& v : g.b) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.input.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer gradient is the outer product") {
    MlpD net;
    net.layers.push_back({Mat::Zero(2, 3), Vec::Zero(2), Activation::Identity});
    Rng rng(7);
    const Vec x = rng.normal_vec(3);
    const Vec upstream = rng.normal_vec(2);
    ForwardCacheD cache;
    forward(net, x, &cache);
    const GradientsD g = backward(net, cache, upstream);
    CHECK((g.w[0] - upstream * x.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((g.b[0] - upstream).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("backward rejects a cache from a different architecture") {
    Rng rng(9);
    const MlpD a = random_net(rng, {3, 4, 2}, Activation::Relu, Activation::Identity);
    const MlpD b = random_net(rng, {3, 5, 2}, Activation::Relu, Activation::Identity);
    ForwardCacheD cache;
    forward(a, Vec::Zero(3), &cache);
    CHECK_THROWS_AS(backward(b, cache, Mat::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    Rng rng(31);
    MlpD net = random_net(rng, {2, 4, 1}, Activation::Tanh, Activation::Identity);
    const MlpD before = net;
    AdamStateD state = AdamStateD::like(net, 1e-2);
    adam_step(net, GradientsD::zeros_like(net, 1), state);
    CHECK(param_distance(net, before) == 0.0);
}

TEST_CASE("adam first step matches the scalar hand trace") {
    // single 1x1 layer, gradient g: step = -lr * m_hat / (sqrt(v_hat) + eps)
    // with m_hat = g and v_hat = g^2 after bias correction.
    MlpD net;
    net.layers.push_back({Mat::Constant(1, 1, 0.5), Vec::Zero(1), Activation::Identity});
    AdamStateD state = AdamStateD::like(net, 0.1);
    GradientsD g = GradientsD::zeros_like(net, 1);
    g.w[0](0, 0) = 0.3;
    adam_step(net, g, state);
    const double expected = 0.5 - 0.1 * 0.3 / (std::abs(0.3) + 1e-8);
    CHECK(net.layers[0].w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam is stateful: two steps differ from one with doubled lr") {
    MlpD once;
    once.layers.push_back({Mat::Constant(1, 1, 1.0), Vec::Zero(1), Activation::Identity});
    MlpD twice = once;

    AdamStateD s_once = AdamStateD::like(once, 0.2);
    AdamStateD s_twice = AdamStateD::like(twice, 0.1);
    GradientsD g = GradientsD::zeros_like(once, 1);
    g.w[0](0, 0) = 1.0;
    adam_step(once, g, s_once);
    adam_step(twice, g, s_twice);
    adam_step(twice, g, s_twice);
    CHECK(once.layers[0].w(0, 0) != twice.layers[0].w(0, 0));
}

TEST_CASE("adam surfaces non-finite gradients") {
    Rng rng(3);
    MlpD net = random_net(rng, {2, 2}, Activation::Identity, Activation::Identity);
    AdamStateD state = AdamStateD::like(net, 1e-3);
    GradientsD g = GradientsD::zeros_like(net, 1);
    g.w[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, g, state), NumericError);
}

TEST_CASE("soft update endpoints and the scalar case") {
    Rng rng(12);
    const MlpD online = random_net(rng, {2, 3, 1}, Activation::Relu, Activation::Tanh);
    MlpD target = random_net(rng, {2, 3, 1}, Activation::Relu, Activation::Tanh);

    MlpD t1 = target;
    soft_update(t1, online, 1.0);
    CHECK(param_distance(t1, online) == 0.0);

    MlpD t0 = target;
    soft_update(t0, online, 0.0);
    CHECK(param_distance(t0, target) == 0.0);

    MlpD scalar_target;
    scalar_target.layers.push_back({Mat::Constant(1, 1, 1.0), Vec::Zero(1), Activation::Identity});
    MlpD scalar_online;
    scalar_online.layers.push_back({Mat::Constant(1, 1, 0.0), Vec::Zero(1), Activation::Identity});
    soft_update(scalar_target, scalar_online, 0.001);
    CHECK(scalar_target.layers[0].w(0, 0) == doctest::Approx(0.999).epsilon(1e-12));

    MlpD mismatched = random_net(rng, {2, 4, 1}, Activation::Relu, Activation::Tanh);
    CHECK_THROWS_AS(soft_update(mismatched, online, 0.5), std::invalid_argument);

    // fixed point: target == online is untouched for any tau
    MlpD same = online;
    soft_update(same, online, 0.37);
    CHECK(param_distance(same, online) == 0.0);
}

TEST_CASE("construction is deterministic given the seed") {
    Rng a(555), b(555);
    const MlpD na = random_net(a, {4, 16, 16, 2}, Activation::Relu, Activation::Tanh);
    const MlpD nb = random_net(b, {4, 16, 16, 2}, Activation::Relu, Activation::Tanh);
    CHECK(param_checksum(na) == param_checksum(nb));
    Rng c(556);
    const MlpD nc = random_net(c, {4, 16, 16, 2}, Activation::Relu, Activation::Tanh);
    CHECK(param_checksum(na) != param_checksum(nc));
}

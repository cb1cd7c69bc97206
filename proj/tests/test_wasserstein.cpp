#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgcr/oracles.hpp"
#include "pgcr/wasserstein.hpp"

using namespace pgcr;

namespace {

EmpiricalSamples make_buffer(const std::vector<double>& values, std::size_t capacity = 256) {
    EmpiricalSamples buf(capacity);
    for (double v : values) buf.push(v);
    return buf;
}

}  // namespace

TEST_CASE("buffer discipline") {
    EmpiricalSamples buf(3);
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) buf.push(v);
    CHECK(buf.values() == std::vector<double>{3.0, 4.0, 5.0});
    CHECK_THROWS_AS(buf.push(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
    CHECK_THROWS_AS(buf.push(std::numeric_limits<double>::infinity()), std::invalid_argument);
    CHECK_THROWS_AS(EmpiricalSamples(0), std::invalid_argument);
}

TEST_CASE("w1 on small known cases") {
    CHECK(w1_empirical(make_buffer({0.5, 0.5}), make_buffer({0.5, 0.5})) == 0.0);
    CHECK(w1_empirical(make_buffer({0.0}), make_buffer({1.0})) == doctest::Approx(1.0));
    CHECK(w1_empirical(make_buffer({0.0, 1.0}), make_buffer({1.0, 2.0})) == doctest::Approx(1.0));
    CHECK_THROWS_AS(w1_empirical(EmpiricalSamples(4), make_buffer({1.0})), std::invalid_argument);
}

TEST_CASE("w1 equals the transport-coupling optimum") {
    Rng rng(468101);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + rng.uniform_int(8), m = 1 + rng.uniform_int(8);
        std::vector<double> a(n), b(m);
        for (auto& v : a) v = rng.uniform(-2.0, 2.0);
        for (auto& v : b) v = rng.uniform(-2.0, 2.0);
        const double fast = w1_empirical(make_buffer(a), make_buffer(b));
        const double lp = oracle::w1_transport(a, b);
        CHECK(std::abs(fast - lp) <= 1e-9);
    }
}

TEST_CASE("metric properties on equal-size buffers") {
    Rng rng(5523);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + rng.uniform_int(6);
        std::vector<double> a(n), b(n), c(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.uniform(-1.0, 1.0);
            b[i] = rng.uniform(-1.0, 1.0);
            c[i] = rng.uniform(-1.0, 1.0);
        }
        const double ab = w1_empirical(make_buffer(a), make_buffer(b));
        const double ba = w1_empirical(make_buffer(b), make_buffer(a));
        const double ac = w1_empirical(make_buffer(a), make_buffer(c));
        const double cb = w1_empirical(make_buffer(c), make_buffer(b));
        CHECK(ab == ba);                      // symmetry, exactly
        CHECK(ab <= ac + cb + 1e-12);         // triangle inequality

        std::vector<double> shuffled = a;
        for (int i = n - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.uniform_int(i + 1)]);
        CHECK(w1_empirical(make_buffer(a), make_buffer(shuffled)) == 0.0);

        const double shift = rng.uniform(-3.0, 3.0);
        std::vector<double> as = a, bs = b;
        for (auto& v : as) v += shift;
        for (auto& v : bs) v += shift;
        const double shifted = w1_empirical(make_buffer(as), make_buffer(bs));
        CHECK(std::abs(shifted - ab) <= 1e-12);
    }
}

TEST_CASE("equal-size fast path matches the quantile integral") {
    Rng rng(8080);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + rng.uniform_int(12);
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.uniform(-5.0, 5.0);
            b[i] = rng.uniform(-5.0, 5.0);
        }
        CHECK(std::abs(detail::w1_sorted_mean(a, b) - detail::w1_quantile_integral(a, b)) <= 1e-12);
    }
}

TEST_CASE("w1 between weighted discrete measures") {
    // point masses a unit apart
    CHECK(w1_discrete<double>({0.0}, {1.0}, {1.0}, {1.0}) == doctest::Approx(1.0));
    // binary measures: W1 = |p - q| * |v1 - v0|
    CHECK(w1_discrete<double>({0.0, 2.0}, {0.3, 0.7}, {0.0, 2.0}, {0.8, 0.2}) ==
          doctest::Approx(1.0));
    // agrees with the uniform-weight path
    Rng rng(9192);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + rng.uniform_int(6), m = 1 + rng.uniform_int(6);
        std::vector<double> a(n), b(m);
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);
        const double uniform = w1_empirical(make_buffer(a), make_buffer(b));
        const double weighted = w1_discrete(a, std::vector<double>(n, 1.0 / n), b,
                                            std::vector<double>(m, 1.0 / m));
        CHECK(std::abs(uniform - weighted) <= 1e-12);
    }
}

TEST_CASE("causal reward evaluates eq-5") {
    const CausalRewardConfig cfg{1.0, 256, 16};
    CHECK(causal_reward(0.0, cfg) == 1.0);
    CHECK(causal_reward(std::log(2.0), cfg) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(causal_reward(2.0, CausalRewardConfig{0.1, 256, 16}) ==
          doctest::Approx(0.8187307531).epsilon(1e-9));
    CHECK_THROWS_AS(causal_reward(-0.1, cfg), std::invalid_argument);
    CHECK_THROWS_AS(causal_reward(1.0, CausalRewardConfig{0.0, 256, 16}), std::invalid_argument);
    CHECK_THROWS_AS(causal_reward(1.0, CausalRewardConfig{1.5, 256, 16}), std::invalid_argument);
}

TEST_CASE("causal reward is strictly decreasing and stays in (0, 1]") {
    Rng rng(34011);
    for (int trial = 0; trial < 200; ++trial) {
        const double lambda = rng.uniform(1e-6, 1.0);
        const double w1 = rng.uniform(0.0, 50.0);
        const double r = causal_reward(w1, CausalRewardConfig{lambda, 256, 16});
        CHECK(r > 0.0);
        CHECK(r <= 1.0);
        const double r_further = causal_reward(w1 + rng.uniform(0.01, 1.0),
                                               CausalRewardConfig{lambda, 256, 16});
        CHECK(r_further < r);
        if (w1 > 0.0) {
            const double sharper = std::min(1.0, lambda + rng.uniform(0.01, 0.5));
            if (sharper > lambda)
                CHECK(causal_reward(w1, CausalRewardConfig{sharper, 256, 16}) < r);
        }
    }
}

#pragma once

#include "pgcr/common.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace pgcr {

/// Sliding-window buffer of reward samples. Pushes past capacity evict the
/// oldest entry first.
template <typename Scalar = double>
class EmpiricalSamplesT {
public:
    explicit EmpiricalSamplesT(std::size_t capacity) : capacity_(capacity) {
        require(capacity_ > 0, "EmpiricalSamples: capacity must be positive");
    }

    void push(Scalar value) {
        require(std::isfinite(static_cast<double>(value)),
                "EmpiricalSamples: sample must be finite");
        values_.push_back(value);
        if (values_.size() > capacity_) values_.pop_front();
    }

    std::size_t size() const { return values_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return values_.empty(); }
    void clear() { values_.clear(); }

    std::vector<Scalar> values() const { return {values_.begin(), values_.end()}; }

private:
    std::size_t capacity_;
    std::deque<Scalar> values_;
};

using EmpiricalSamples = EmpiricalSamplesT<double>;

namespace detail {

/// Mean absolute difference of the sorted samples; the exact W1 when both
/// empirical distributions carry the same number of atoms.
template <typename Scalar>
Scalar w1_sorted_mean(std::vector<Scalar> a, std::vector<Scalar> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<Scalar>(a.size());
}

/// Integral of |F_a^{-1}(u) - F_b^{-1}(u)| over the merged quantile
/// breakpoints {i/n} and {j/m}. Breakpoint comparisons are done in integer
/// arithmetic (i*m vs j*n), so segment boundaries are exact.
template <typename Scalar>
Scalar w1_quantile_integral(std::vector<Scalar> a, std::vector<Scalar> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n = a.size(), m = b.size();
    Scalar total = Scalar(0);
    std::size_t i = 0, j = 0;
    std::size_t pos = 0;  // current position in units of 1/(n*m)
    while (i < n && j < m) {
        const std::size_t next_a = (i + 1) * m;
        const std::size_t next_b = (j + 1) * n;
        const std::size_t next = std::min(next_a, next_b);
        total += static_cast<Scalar>(next - pos) * std::abs(a[i] - b[j]);
        pos = next;
        if (next == next_a) ++i;
        if (next == next_b) ++j;
    }
    return total / static_cast<Scalar>(n * m);
}

}  // namespace detail

/// First-order Wasserstein distance between two empirical distributions
/// (uniform weight per sample). Exact; equal sample counts reduce to the
/// mean sorted absolute difference.
template <typename Scalar>
Scalar w1_empirical(const EmpiricalSamplesT<Scalar>& a, const EmpiricalSamplesT<Scalar>& b) {
    require(!a.empty() && !b.empty(), "w1_empirical: buffers must be non-empty");
    if (a.size() == b.size()) return detail::w1_sorted_mean(a.values(), b.values());
    return detail::w1_quantile_integral(a.values(), b.values());
}

/// W1 between two weighted discrete measures on the real line, via the CDF
/// difference integrated over the merged support. Weights must each sum to 1.
template <typename Scalar>
Scalar w1_discrete(std::vector<Scalar> a_values, std::vector<Scalar> a_weights,
                   std::vector<Scalar> b_values, std::vector<Scalar> b_weights) {
    require(a_values.size() == a_weights.size() && b_values.size() == b_weights.size(),
            "w1_discrete: values/weights size mismatch");
    require(!a_values.empty() && !b_values.empty(), "w1_discrete: empty measure");
    const Scalar wa = std::accumulate(a_weights.begin(), a_weights.end(), Scalar(0));
    const Scalar wb = std::accumulate(b_weights.begin(), b_weights.end(), Scalar(0));
    require(std::abs(wa - Scalar(1)) <= Scalar(1e-9) && std::abs(wb - Scalar(1)) <= Scalar(1e-9),
            "w1_discrete: weights must sum to 1");

    auto sort_by_value = [](std::vector<Scalar>& vals, std::vector<Scalar>& wts) {
        std::vector<std::size_t> order(vals.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t l, std::size_t r) { return vals[l] < vals[r]; });
        std::vector<Scalar> v2(vals.size()), w2(wts.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            v2[k] = vals[order[k]];
            w2[k] = wts[order[k]];
        }
        vals = std::move(v2);
        wts = std::move(w2);
    };
    sort_by_value(a_values, a_weights);
    sort_by_value(b_values, b_weights);

    Scalar total = Scalar(0);
    Scalar cdf_a = Scalar(0), cdf_b = Scalar(0);
    std::size_t i = 0, j = 0;
    Scalar prev = std::min(a_values[0], b_values[0]);
    while (i < a_values.size() || j < b_values.size()) {
        Scalar x;
        if (j >= b_values.size() || (i < a_values.size() && a_values[i] <= b_values[j]))
            x = a_values[i];
        else
            x = b_values[j];
        total += std::abs(cdf_a - cdf_b) * (x - prev);
        while (i < a_values.size() && a_values[i] == x) cdf_a += a_weights[i++];
        while (j < b_values.size() && b_values[j] == x) cdf_b += b_weights[j++];
        prev = x;
    }
    return total;
}

/// Configuration of the causal reward r = exp(-lambda * W1).
struct CausalRewardConfig {
    double lambda = 0.1;      // sensitivity of the reward to the W1 signal
    std::size_t window = 256; // sliding-window size of the reward buffers
    std::size_t min_fill = 16;  // paired samples required before W1 activates

    void validate() const {
        require(lambda > 0.0 && lambda <= 1.0, "CausalRewardConfig: lambda must lie in (0, 1]");
        require(window > 0, "CausalRewardConfig: window must be positive");
    }
};

/// exp(-lambda * w1), mapping distributional discrepancy into (0, 1].
inline double causal_reward(double w1, const CausalRewardConfig& cfg) {
    cfg.validate();
    require(std::isfinite(w1) && w1 >= 0.0, "causal_reward: w1 must be finite and nonnegative");
    return std::exp(-cfg.lambda * w1);
}

}  // namespace pgcr

#pragma once

#include "pgcr/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace pgcr {

enum class Activation { Identity, Relu, Tanh };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + s);
}

/// Dense feed-forward network. Columns are samples throughout, so a batch of
/// B inputs is an (input_size x B) matrix.
template <typename Scalar = double>
struct Mlp {
    using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    struct Layer {
        MatX w;  // out x in
        VecX b;
        Activation act = Activation::Identity;
    };

    std::vector<Layer> layers;

    int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols()); }
    int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.rows()); }

    std::vector<int> layer_sizes() const {
        std::vector<int> sizes = {input_size()};
        for (const auto& l : layers) sizes.push_back(static_cast<int>(l.w.rows()));
        return sizes;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
        return n;
    }

    bool same_architecture(const Mlp& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].w.rows() != other.layers[i].w.rows() ||
                layers[i].w.cols() != other.layers[i].w.cols() ||
                layers[i].act != other.layers[i].act)
                return false;
        return true;
    }

    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.w.allFinite() || !l.b.allFinite()) return false;
        return true;
    }

    /// Weights and biases uniform in +-sqrt(1/fan_in).
    static Mlp make(const std::vector<int>& sizes, Activation hidden, Activation output,
                    Rng& rng) {
        require(sizes.size() >= 2, "Mlp::make: need at least input and output sizes");
        Mlp net;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            require(sizes[i] > 0 && sizes[i + 1] > 0, "Mlp::make: layer sizes must be positive");
            Layer l;
            const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(sizes[i]));
            l.w.resize(sizes[i + 1], sizes[i]);
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                    l.w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
            l.b.resize(sizes[i + 1]);
            for (Eigen::Index r = 0; r < l.b.size(); ++r)
                l.b[r] = static_cast<Scalar>(rng.uniform(-bound, bound));
            l.act = (i + 2 == sizes.size()) ? output : hidden;
            net.layers.push_back(std::move(l));
        }
        return net;
    }
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> apply_activation(
    Activation act, Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Relu: return z.cwiseMax(Scalar(0));
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

/// Activations recorded by a forward pass; consumed by backward().
template <typename Scalar = double>
struct ForwardCache {
    using MatX = typename Mlp<Scalar>::MatX;
    std::vector<int> sizes;    // architecture stamp of the producing net
    MatX input;                // in x B
    std::vector<MatX> preact;  // per layer, out x B
    std::vector<MatX> act;     // per layer, out x B
};

/// Batched forward pass; columns are samples.
template <typename Scalar>
typename Mlp<Scalar>::MatX forward_batch(const Mlp<Scalar>& net,
                                         const typename Mlp<Scalar>::MatX& x,
                                         ForwardCache<Scalar>* cache = nullptr) {
    require(!net.layers.empty(), "forward: empty network");
    require(x.rows() == net.input_size(), "forward: input size mismatch");
    if (cache) {
        cache->sizes = net.layer_sizes();
        cache->input = x;
        cache->preact.clear();
        cache->act.clear();
    }
    typename Mlp<Scalar>::MatX h = x;
    for (const auto& l : net.layers) {
        typename Mlp<Scalar>::MatX z = (l.w * h).colwise() + l.b;
        h = apply_activation<Scalar>(l.act, z);
        if (cache) {
            cache->preact.push_back(std::move(z));
            cache->act.push_back(h);
        }
    }
    return h;
}

template <typename Scalar>
typename Mlp<Scalar>::VecX forward(const Mlp<Scalar>& net, const typename Mlp<Scalar>::VecX& x,
                                   ForwardCache<Scalar>* cache = nullptr) {
    return forward_batch<Scalar>(net, x, cache).col(0);
}

/// Parameter and input gradients of sum_samples <upstream_col, f(x_col)>.
template <typename Scalar = double>
struct Gradients {
    using VecX = typename Mlp<Scalar>::VecX;
    using MatX = typename Mlp<Scalar>::MatX;
    std::vector<MatX> w;
    std::vector<VecX> b;
    MatX input;

    static Gradients zeros_like(const Mlp<Scalar>& net, Eigen::Index batch) {
        Gradients g;
        for (const auto& l : net.layers) {
            g.w.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
            g.b.push_back(VecX::Zero(l.b.size()));
        }
        g.input = MatX::Zero(net.input_size(), batch);
        return g;
    }

    void add(const Gradients& other, Scalar scale = Scalar(1)) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] += scale * other.w[i];
            b[i] += scale * other.b[i];
        }
    }

    bool all_finite() const {
        for (const auto& m : w)
            if (!m.allFinite()) return false;
        for (const auto& v : b)
            if (!v.allFinite()) return false;
        return input.allFinite();
    }
};

/// Exact reverse-mode gradients. `upstream` has one column per sample of the
/// producing forward pass; the cache must come from a matching forward on
/// the same architecture.
template <typename Scalar>
Gradients<Scalar> backward(const Mlp<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const typename Mlp<Scalar>::MatX& upstream) {
    require(cache.sizes == net.layer_sizes() &&
                cache.preact.size() == net.layers.size(),
            "backward: cache does not match this network");
    require(upstream.rows() == net.output_size() && upstream.cols() == cache.input.cols(),
            "backward: upstream shape mismatch");

    Gradients<Scalar> g;
    g.w.resize(net.layers.size());
    g.b.resize(net.layers.size());

    typename Mlp<Scalar>::MatX delta = upstream;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        switch (layer.act) {
            case Activation::Identity: break;
            case Activation::Relu:
                delta = ((cache.preact[li].array() > Scalar(0)).template cast<Scalar>() *
                         delta.array())
                            .matrix();
                break;
            case Activation::Tanh:
                delta = ((Scalar(1) - cache.act[li].array().square()) * delta.array()).matrix();
                break;
        }
        const auto& below = (li == 0) ? cache.input : cache.act[li - 1];
        g.w[li] = delta * below.transpose();
        g.b[li] = delta.rowwise().sum();
        delta = (layer.w.transpose() * delta).eval();
    }
    g.input = delta;
    return g;
}

/// Adam moments and hyperparameters, shaped like the network they drive.
template <typename Scalar = double>
struct AdamState {
    using VecX = typename Mlp<Scalar>::VecX;
    using MatX = typename Mlp<Scalar>::MatX;

    std::vector<MatX> m_w, v_w;
    std::vector<VecX> m_b, v_b;
    long step = 0;
    Scalar lr = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    static AdamState like(const Mlp<Scalar>& net, Scalar lr) {
        AdamState s;
        s.lr = lr;
        for (const auto& l : net.layers) {
            s.m_w.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
            s.v_w.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
            s.m_b.push_back(VecX::Zero(l.b.size()));
            s.v_b.push_back(VecX::Zero(l.b.size()));
        }
        return s;
    }
};

/// Bias-corrected Adam update, in place. Throws NumericError on non-finite
/// gradients.
template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const Gradients<Scalar>& grads, AdamState<Scalar>& state) {
    require(grads.w.size() == net.layers.size() && state.m_w.size() == net.layers.size(),
            "adam_step: shape mismatch");
    for (std::size_t i = 0; i < grads.w.size(); ++i)
        if (!grads.w[i].allFinite() || !grads.b[i].allFinite())
            throw NumericError("adam_step: non-finite gradient");

    ++state.step;
    const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
    const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        state.m_w[i] = state.beta1 * state.m_w[i] + (Scalar(1) - state.beta1) * grads.w[i];
        state.v_w[i] = state.beta2 * state.v_w[i] +
                       (Scalar(1) - state.beta2) * grads.w[i].array().square().matrix();
        l.w.array() -= state.lr * (state.m_w[i].array() / c1) /
                       ((state.v_w[i].array() / c2).sqrt() + state.eps);

        state.m_b[i] = state.beta1 * state.m_b[i] + (Scalar(1) - state.beta1) * grads.b[i];
        state.v_b[i] = state.beta2 * state.v_b[i] +
                       (Scalar(1) - state.beta2) * grads.b[i].array().square().matrix();
        l.b.array() -= state.lr * (state.m_b[i].array() / c1) /
                       ((state.v_b[i].array() / c2).sqrt() + state.eps);
    }
}

/// Polyak averaging: target <- tau * online + (1 - tau) * target.
template <typename Scalar>
void soft_update(Mlp<Scalar>& target, const Mlp<Scalar>& online, Scalar tau) {
    require(tau >= Scalar(0) && tau <= Scalar(1), "soft_update: tau must lie in [0, 1]");
    require(target.same_architecture(online), "soft_update: architecture mismatch");
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        target.layers[i].w = tau * online.layers[i].w + (Scalar(1) - tau) * target.layers[i].w;
        target.layers[i].b = tau * online.layers[i].b + (Scalar(1) - tau) * target.layers[i].b;
    }
}

/// FNV-1a over the raw parameter bytes, in layer order.
template <typename Scalar>
std::uint64_t param_checksum(const Mlp<Scalar>& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : net.layers) {
        h = fnv1a(l.w.data(), sizeof(Scalar) * static_cast<std::size_t>(l.w.size()), h);
        h = fnv1a(l.b.data(), sizeof(Scalar) * static_cast<std::size_t>(l.b.size()), h);
    }
    return h;
}

template <typename Scalar>
Scalar param_distance(const Mlp<Scalar>& a, const Mlp<Scalar>& b) {
    require(a.same_architecture(b), "param_distance: architecture mismatch");
    Scalar sq = Scalar(0);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        sq += (a.layers[i].w - b.layers[i].w).squaredNorm();
        sq += (a.layers[i].b - b.layers[i].b).squaredNorm();
    }
    return std::sqrt(sq);
}

using MlpD = Mlp<double>;
using AdamStateD = AdamState<double>;
using GradientsD = Gradients<double>;
using ForwardCacheD = ForwardCache<double>;

}  // namespace pgcr

#pragma once

#include "pgcr/common.hpp"

#include <functional>
#include <optional>

namespace pgcr {

/// Synthetic recommendation MDP with a known split of the state into
/// causally relevant components (CRC, the leading d_crc dimensions) and
/// causally irrelevant ones (CIRC, the trailing d_circ dimensions):
///
///   crc'  = crc + step_scale * tanh(crc_in * (crc_mix * crc + a))
///               + crc_drift + trans_noise * xi
///   circ' = circ_mix * circ + circ_noise * xi        (action-free)
///   r     = reward_bias - |target_map s - a|^2 - action_cost |a|^2
///
/// target_map reads only the CRC columns, so the reward is a pure function
/// of (CRC, action): the best recommendation matches the user-interest
/// projection of the causally relevant state. A well-trained policy earns a
/// nearly constant reward (reward_bias), which concentrates the reward
/// distribution and makes distributional comparisons against it sharp. The
/// action a = -crc_mix * crc freezes the CRC drift exactly, so
/// CRC-preserving interventions exist by construction. The split is ground
/// truth for validation only; learners never see it.
struct SynthRecEnv {
    int d_crc = 8;
    int d_circ = 8;
    int action_dim = 4;
    int horizon = 20;

    Mat target_map;  // action_dim x state_dim, CIRC columns identically zero
    double action_cost = 0.0;
    double reward_bias = 1.0;

    Mat crc_mix;   // action_dim x d_crc
    Mat crc_in;    // d_crc x action_dim
    Vec crc_drift; // d_crc
    Mat circ_mix;  // d_circ x d_circ, spectral radius < 1
    double step_scale = 0.5;

    double trans_noise = 0.05;  // exogenous noise on the CRC transition
    double circ_noise = 0.3;    // observation/process noise on CIRC
    double init_scale = 1.0;

    std::optional<Mat> item_catalog;  // rows are catalog action vectors
    std::uint64_t seed = 0;

    int state_dim() const { return d_crc + d_circ; }

    void validate() const {
        require(d_crc >= 0 && d_circ >= 0 && d_crc + d_circ > 0, "SynthRecEnv: empty state");
        require(action_dim > 0, "SynthRecEnv: action_dim must be positive");
        require(horizon >= 1, "SynthRecEnv: horizon must be at least 1");
        require(target_map.rows() == action_dim && target_map.cols() == state_dim(),
                "SynthRecEnv: target_map must be action_dim x state_dim");
        require(d_circ == 0 ||
                    target_map.rightCols(d_circ).cwiseAbs().maxCoeff() == 0.0,
                "SynthRecEnv: CIRC columns of target_map must be zero");
    }
};

/// Default testbed instance; all matrices derive deterministically from the
/// seed. Two couplings give the testbed its causal structure:
///   crc_mix = -T_crc: the reward-optimal action is exactly the
///     drift-freezing one, so a policy that recommends well also holds the
///     causally relevant state still;
///   crc_in = c T_crc': recommendations shift preferences along the same
///     feature directions they are scored against, so interventions move
///     the CRCs only inside the reward-visible subspace.
inline SynthRecEnv make_default_env(std::uint64_t seed = 0) {
    SynthRecEnv env;
    env.seed = seed;
    Rng rng = Rng::derive(seed, 0xE0500001);

    env.target_map = Mat::Zero(env.action_dim, env.state_dim());
    for (int r = 0; r < env.action_dim; ++r)
        for (int c = 0; c < env.d_crc; ++c)
            env.target_map(r, c) = rng.normal() * 0.7 / std::sqrt(double(env.d_crc));

    env.crc_mix = -env.target_map.leftCols(env.d_crc);
    env.crc_in = 2.0 * env.target_map.leftCols(env.d_crc).transpose();
    env.crc_drift = Vec::Zero(env.d_crc);

    // slowly mixing CIRC dynamics: scaled random orthogonal-ish rotation
    Mat raw(env.d_circ, env.d_circ);
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw.data()[k] = rng.normal();
    const Eigen::HouseholderQR<Mat> qr(raw);
    Mat q = qr.householderQ();
    env.circ_mix = 0.9 * q;
    return env;
}

/// Content fingerprint of the environment configuration.
inline std::uint64_t env_fingerprint(const SynthRecEnv& env) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_int = [&](long v) { h = fnv1a(&v, sizeof(v), h); };
    auto mix_mat = [&](const Mat& m) {
        h = fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
    };
    mix_int(env.d_crc);
    mix_int(env.d_circ);
    mix_int(env.action_dim);
    mix_int(env.horizon);
    mix_mat(env.target_map);
    mix_mat(env.crc_mix);
    mix_mat(env.crc_in);
    mix_mat(env.circ_mix);
    const double scalars[] = {env.action_cost, env.reward_bias, env.step_scale,
                              env.trans_noise, env.circ_noise, env.init_scale};
    h = fnv1a(scalars, sizeof(scalars), h);
    h = fnv1a(env.crc_drift.data(), sizeof(double) * env.crc_drift.size(), h);
    if (env.item_catalog) mix_mat(*env.item_catalog);
    mix_int(static_cast<long>(env.seed));
    return h;
}

/// Deterministic reward h(CRC, action); never reads the CIRC dimensions.
inline double reward(const SynthRecEnv& env, const Vec& state, const Vec& action) {
    require(state.size() == env.state_dim(), "reward: state dim mismatch");
    require(action.size() == env.action_dim, "reward: action dim mismatch");
    return env.reward_bias - (env.target_map * state - action).squaredNorm() -
           env.action_cost * action.squaredNorm();
}

/// Per-state reward-optimal action: argmax of the matching reward under the
/// box constraint, clamp(target_map s / (1 + action_cost)).
inline Vec optimal_action(const SynthRecEnv& env, const Vec& state) {
    return ((env.target_map * state) / (1.0 + env.action_cost)).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Deterministic part of the transition (noise scales ignored).
inline Vec transition_mean(const SynthRecEnv& env, const Vec& state, const Vec& action) {
    Vec next(env.state_dim());
    const auto crc = state.head(env.d_crc);
    const auto circ = state.tail(env.d_circ);
    next.head(env.d_crc) =
        crc + env.step_scale * (env.crc_in * (env.crc_mix * crc + action)).array().tanh().matrix() +
        env.crc_drift;
    next.tail(env.d_circ) = env.circ_mix * circ;
    return next;
}

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool done = false;
};

/// One environment step from (state, action) at time t (0-based within the
/// episode). The CIRC successor never reads the action.
inline StepResult step(const SynthRecEnv& env, const Vec& state, const Vec& action, int t,
                       Rng& rng) {
    env.validate();
    require(state.size() == env.state_dim(), "step: state dim mismatch");
    require(action.size() == env.action_dim, "step: action dim mismatch");
    StepResult out;
    out.next_state = transition_mean(env, state, action);
    out.next_state.head(env.d_crc) += env.trans_noise * rng.normal_vec(env.d_crc);
    out.next_state.tail(env.d_circ) += env.circ_noise * rng.normal_vec(env.d_circ);
    out.reward = reward(env, state, action);
    out.done = (t + 1) >= env.horizon;
    return out;
}

inline Vec initial_state(const SynthRecEnv& env, Rng& rng) {
    return env.init_scale * rng.normal_vec(env.state_dim());
}

/// Realizes do(a_t := a_intervened): the environment transition mechanism
/// applied to (state, a_intervened). Identical contract to step's
/// next-state component.
inline Vec apply_intervention(const SynthRecEnv& env, const Vec& state, const Vec& a_intervened,
                              Rng& rng) {
    require(state.size() == env.state_dim(), "apply_intervention: state dim mismatch");
    require(a_intervened.size() == env.action_dim, "apply_intervention: action dim mismatch");
    Vec next = transition_mean(env, state, a_intervened);
    next.head(env.d_crc) += env.trans_noise * rng.normal_vec(env.d_crc);
    next.tail(env.d_circ) += env.circ_noise * rng.normal_vec(env.d_circ);
    return next;
}

/// Maps a continuous actor output to the nearest catalog item (Euclidean).
inline Vec nearest_catalog_action(const SynthRecEnv& env, const Vec& action) {
    require(env.item_catalog.has_value(), "nearest_catalog_action: no catalog configured");
    const Mat& catalog = *env.item_catalog;
    Eigen::Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < catalog.rows(); ++r) {
        const double d = (catalog.row(r).transpose() - action).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = r;
        }
    }
    return catalog.row(best).transpose();
}

// ---------------------------------------------------------------------------
// Offline data
// ---------------------------------------------------------------------------

struct Transition {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    bool done = false;
    int episode_id = 0;
    int t = 0;
};

struct DatasetMeta {
    std::uint64_t env_fingerprint = 0;
    std::string behavior_policy;
    std::uint64_t seed = 0;
};

struct OfflineDataset {
    DatasetMeta meta;
    std::vector<Transition> transitions;

    void validate() const {
        int prev_episode = -1, prev_t = -1;
        for (const auto& tr : transitions) {
            require(tr.state.size() == transitions.front().state.size() &&
                        tr.action.size() == transitions.front().action.size(),
                    "OfflineDataset: inconsistent dimensions");
            require(std::isfinite(tr.reward), "OfflineDataset: non-finite reward");
            if (tr.episode_id == prev_episode) {
                require(tr.t > prev_t, "OfflineDataset: per-episode t must increase");
            } else {
                require(tr.episode_id == prev_episode + 1,
                        "OfflineDataset: episode ids must be contiguous");
            }
            prev_episode = tr.episode_id;
            prev_t = tr.t;
        }
    }
};

using BehaviorPolicy = std::function<Vec(const Vec& state, Rng& rng)>;

inline BehaviorPolicy uniform_random_policy(int action_dim) {
    return [action_dim](const Vec&, Rng& rng) { return rng.uniform_vec(action_dim, -1.0, 1.0); };
}

/// Rolls out `n_episodes` of the behavior policy. Episode e draws its rng
/// stream as hash(seed, e), so datasets are reproducible and episodes are
/// independent.
inline OfflineDataset generate_offline_dataset(const SynthRecEnv& env,
                                               const BehaviorPolicy& policy, int n_episodes,
                                               std::uint64_t seed,
                                               const std::string& behavior_id = "custom") {
    env.validate();
    require(n_episodes >= 1, "generate_offline_dataset: need at least one episode");
    OfflineDataset data;
    data.meta = {env_fingerprint(env), behavior_id, seed};
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(ep));
        Vec state = initial_state(env, rng);
        for (int t = 0; t < env.horizon; ++t) {
            const Vec action = policy(state, rng);
            const StepResult sr = step(env, state, action, t, rng);
            data.transitions.push_back({state, action, sr.reward, sr.next_state, sr.done, ep, t});
            state = sr.next_state;
            if (sr.done) break;
        }
    }
    data.validate();
    return data;
}

}  // namespace pgcr

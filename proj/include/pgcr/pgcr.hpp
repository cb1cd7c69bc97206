#pragma once

#include "pgcr/causal_policy.hpp"

namespace pgcr {

/// State encoder phi mapping raw states into the latent space the
/// recommendation policy acts on.
struct Encoder {
    MlpD net;
    int latent_dim = 0;

    Vec encode(const Vec& state) const { return forward(net, state); }
    Mat encode_batch(const Mat& states) const { return forward_batch(net, states); }
};

struct PgcrConfig {
    int latent_dim = 8;
    int encoder_hidden = 128;
    double encoder_lr = 1e-3;
    int encoder_batch = 64;
    double joint_rl_weight = 1.0;  // critic-loss gradient weight into phi (anti-collapse)
    int epochs = 10;
    long rl_gradient_steps = 2000;  // policy-only updates after the encoder phase
    std::uint64_t seed = 0;

    void validate() const {
        require(latent_dim >= 1, "PgcrConfig: latent_dim must be at least 1");
        require(encoder_hidden >= 1 && encoder_batch >= 1, "PgcrConfig: sizes must be positive");
        require(encoder_lr > 0.0, "PgcrConfig: encoder_lr must be positive");
        require(joint_rl_weight >= 0.0, "PgcrConfig: joint_rl_weight must be nonnegative");
        require(epochs >= 0 && rl_gradient_steps >= 0, "PgcrConfig: counts must be nonnegative");
    }
};

inline Encoder make_encoder(int state_dim, const PgcrConfig& cfg, Rng& rng) {
    Encoder enc;
    enc.latent_dim = cfg.latent_dim;
    enc.net = MlpD::make({state_dim, cfg.encoder_hidden, cfg.latent_dim}, Activation::Relu,
                         Activation::Identity, rng);
    return enc;
}

/// s^I for one state: the causal policy picks the intervention action and
/// the environment realizes the modified state.
inline Vec modified_state(const CausalAgent& causal, const SynthRecEnv& env, const Vec& state,
                          Rng& rng) {
    require(state.size() == env.state_dim(), "modified_state: state dim mismatch");
    return apply_intervention(env, state, causal.intervention(state), rng);
}

/// Squared latent alignment error |phi(s) - phi(s^I)|^2.
inline double encoder_loss(const Encoder& phi, const Vec& s, const Vec& s_intervened) {
    require(s.size() == s_intervened.size(), "encoder_loss: state dim mismatch");
    return (phi.encode(s) - phi.encode(s_intervened)).squaredNorm();
}

/// action = policy(phi(state)); states with equal latents act identically by
/// construction.
inline Vec act_latent(const ActorCritic& policy, const Encoder& encoder, const Vec& state) {
    return policy.act(encoder.encode(state));
}

struct PgcrTracePoint {
    int epoch = 0;
    int batch = 0;
    double mse_loss = 0.0;
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    double latent_variance = 0.0;
};

struct PgcrTrainResult {
    Encoder encoder;
    ActorCritic policy;
    std::vector<PgcrTracePoint> trace;
    bool raw_state_mode = false;  // set when the encoder phase was skipped
};

/// Source of modified states for the encoder phase. The default is the
/// causal policy; the PGCR-C ablation swaps in random dataset states.
using ModifiedStateProvider = std::function<Vec(const Transition&, Rng&)>;

inline ModifiedStateProvider causal_state_provider(const CausalAgent& causal,
                                                   const SynthRecEnv& env) {
    return [&causal, &env](const Transition& tr, Rng& rng) {
        return modified_state(causal, env, tr.state, rng);
    };
}

inline ModifiedStateProvider random_state_provider(const OfflineDataset& dataset) {
    require(!dataset.transitions.empty(), "random_state_provider: empty dataset");
    return [&dataset](const Transition&, Rng& rng) {
        const auto idx = static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(dataset.transitions.size())));
        return dataset.transitions[idx].state;
    };
}

namespace detail {

/// Mean per-dimension variance of the latent codes of a probe batch.
inline double latent_variance(const Encoder& enc, const Mat& probe_states) {
    if (probe_states.cols() < 2) return 0.0;
    const Mat z = enc.encode_batch(probe_states);
    const Vec mean = z.rowwise().mean();
    return (z.colwise() - mean).array().square().rowwise().sum().mean() /
           static_cast<double>(z.cols() - 1);
}

inline void check_finite_encoder(const Encoder& enc) {
    if (!enc.net.all_finite())
        throw NumericError("pgcr: encoder diverged to non-finite parameters");
}

}  // namespace detail

/// Algorithm 2 with an explicit modified-state source. Per epoch and batch:
/// (i) generate s^I, (ii) take an encoder step on the alignment loss plus
/// joint_rl_weight times the critic loss flowing through z = phi(s), and
/// (iii) update the latent-space actor-critic. After the epochs, the policy
/// alone trains for rl_gradient_steps more updates on the frozen encoder.
inline PgcrTrainResult train_pgcr_with_provider(const OfflineDataset& dataset,
                                                const ModifiedStateProvider& provider,
                                                AgentKind kind, const PgcrConfig& cfg,
                                                const AgentConfig& agent_cfg) {
    cfg.validate();
    agent_cfg.validate();
    require(!dataset.transitions.empty(), "train_pgcr: dataset must be non-empty");
    const int state_dim = static_cast<int>(dataset.transitions.front().state.size());
    const int action_dim = static_cast<int>(dataset.transitions.front().action.size());
    const auto n = dataset.transitions.size();

    Rng rng(splitmix64(cfg.seed ^ 0x9c2a));
    PgcrTrainResult result;
    result.encoder = make_encoder(state_dim, cfg, rng);
    AdamStateD encoder_opt = AdamStateD::like(result.encoder.net, cfg.encoder_lr);
    result.policy = make_agent(kind, cfg.latent_dim, action_dim, agent_cfg, rng);
    ActorCritic& policy = result.policy;

    // fixed probe batch for the latent-variance guard
    const auto probe_n = static_cast<Eigen::Index>(std::min<std::size_t>(n, 256));
    Mat probe(state_dim, probe_n);
    for (Eigen::Index i = 0; i < probe_n; ++i)
        probe.col(i) = dataset.transitions[static_cast<std::size_t>(i)].state;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(static_cast<int>(i + 1))]);

        const std::size_t batch_size = static_cast<std::size_t>(cfg.encoder_batch);
        int batch_index = 0;
        for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
            const std::size_t count = std::min(batch_size, n - start);
            if (count < 2) continue;
            const auto b = static_cast<Eigen::Index>(count);

            Mat states(state_dim, b), actions(action_dim, b), next_states(state_dim, b),
                modified(state_dim, b);
            Eigen::RowVectorXd rewards(b), not_done(b);
            for (Eigen::Index k = 0; k < b; ++k) {
                const Transition& tr = dataset.transitions[order[start + k]];
                states.col(k) = tr.state;
                actions.col(k) = tr.action;
                next_states.col(k) = tr.next_state;
                rewards[k] = tr.reward;
                not_done[k] = tr.done ? 0.0 : 1.0;
                modified.col(k) = provider(tr, rng);
            }

            // encoder forwards; z_next is a stop-gradient target in the same
            // latent space as z
            ForwardCacheD cache_z, cache_zi;
            const Mat z = forward_batch(result.encoder.net, states, &cache_z);
            const Mat z_int = forward_batch(result.encoder.net, modified, &cache_zi);
            const Mat z_next = result.encoder.encode_batch(next_states);

            const Mat diff = z - z_int;
            const double mse = diff.array().square().colwise().sum().mean();
            const Mat upstream_mse = (2.0 / static_cast<double>(b)) * diff;

            // critic targets in latent space
            Mat next_actions = forward_batch(policy.actor_target, z_next);
            if (kind == AgentKind::Td3 && policy.config.td3_target_noise > 0.0) {
                for (Eigen::Index k = 0; k < next_actions.size(); ++k)
                    next_actions.data()[k] += std::clamp(
                        policy.config.td3_target_noise * policy.target_noise_rng.normal(),
                        -policy.config.td3_noise_clip, policy.config.td3_noise_clip);
                next_actions = next_actions.cwiseMax(-1.0).cwiseMin(1.0);
            }
            const Mat joint_next = detail::stack(z_next, next_actions);
            Eigen::RowVectorXd q_next = forward_batch(policy.critic1_target, joint_next).row(0);
            if (kind == AgentKind::Td3)
                q_next =
                    q_next.cwiseMin(forward_batch(*policy.critic2_target, joint_next).row(0));
            const Eigen::RowVectorXd targets =
                rewards + policy.config.gamma * not_done.cwiseProduct(q_next);

            // critic step, keeping the input gradient for the encoder
            ForwardCacheD cache_q;
            const Mat joint = detail::stack(z, actions);
            const Eigen::RowVectorXd err =
                forward_batch(policy.critic1, joint, &cache_q).row(0) - targets;
            const double critic_loss = err.squaredNorm() / static_cast<double>(b);
            const Mat upstream_q = (2.0 / static_cast<double>(b)) * err;
            const GradientsD critic_grads = backward(policy.critic1, cache_q, upstream_q);
            adam_step(policy.critic1, critic_grads, policy.critic1_opt);
            if (kind == AgentKind::Td3)
                detail::critic_step(*policy.critic2, policy.critic2_opt, joint, targets);

            // encoder step: alignment + weighted critic gradient through z
            const Mat upstream_z =
                upstream_mse + cfg.joint_rl_weight * critic_grads.input.topRows(cfg.latent_dim);
            GradientsD enc_grads = backward(result.encoder.net, cache_z, upstream_z);
            enc_grads.add(backward(result.encoder.net, cache_zi, -upstream_mse));
            adam_step(result.encoder.net, enc_grads, encoder_opt);
            detail::check_finite_encoder(result.encoder);

            // actor step on the (constant) latent batch
            double actor_obj = 0.0;
            ++policy.update_count;
            if (kind == AgentKind::Ddpg ||
                (policy.update_count - 1) % policy.config.td3_policy_delay == 0) {
                actor_obj = detail::actor_step(policy, z);
                detail::update_targets(policy);
            }
            detail::check_finite(policy);

            result.trace.push_back({epoch, batch_index, mse, critic_loss, actor_obj,
                                    detail::latent_variance(result.encoder, probe)});
        }
    }

    // policy-only refinement on the frozen encoder
    if (cfg.rl_gradient_steps > 0) {
        ReplayBuffer replay(std::max<std::size_t>(agent_cfg.buffer_capacity, n));
        for (const auto& tr : dataset.transitions) {
            Transition latent = tr;
            latent.state = result.encoder.encode(tr.state);
            latent.next_state = result.encoder.encode(tr.next_state);
            replay.push(std::move(latent));
        }
        const auto batch = std::min<std::size_t>(static_cast<std::size_t>(agent_cfg.batch),
                                                 replay.size());
        for (long i = 0; i < cfg.rl_gradient_steps; ++i)
            agent_update(policy, replay.sample(batch, rng));
    }
    return result;
}

/// Algorithm 2 with modified states generated by the trained causal policy.
inline PgcrTrainResult train_pgcr(const OfflineDataset& dataset, const CausalAgent& causal,
                                  const SynthRecEnv& env, AgentKind kind, const PgcrConfig& cfg,
                                  const AgentConfig& agent_cfg) {
    require(causal.ac.state_dim == env.state_dim(),
            "train_pgcr: causal agent does not match the environment");
    return train_pgcr_with_provider(dataset, causal_state_provider(causal, env), kind, cfg,
                                    agent_cfg);
}

/// Raw-state fallback: no encoder phase, plain offline training on the
/// dataset. Used for baselines and for ingested datasets where no
/// environment can realize interventions. The gradient budget matches what
/// the PGCR run would spend (per-batch updates during the epochs plus the
/// refinement steps), so comparisons are update-for-update fair.
inline PgcrTrainResult train_raw_policy(const OfflineDataset& dataset, AgentKind kind,
                                        const PgcrConfig& cfg, const AgentConfig& agent_cfg) {
    require(!dataset.transitions.empty(), "train_raw_policy: dataset must be non-empty");
    Rng rng(splitmix64(cfg.seed ^ 0x9c2a));
    const int state_dim = static_cast<int>(dataset.transitions.front().state.size());
    const int action_dim = static_cast<int>(dataset.transitions.front().action.size());
    PgcrTrainResult result;
    result.raw_state_mode = true;
    result.encoder.latent_dim = state_dim;
    result.encoder.net = MlpD();  // no encoder; policies read raw states
    result.policy = make_agent(kind, state_dim, action_dim, agent_cfg, rng);
    const auto n = dataset.transitions.size();
    const std::size_t per_epoch =
        (n + static_cast<std::size_t>(cfg.encoder_batch) - 1) /
        static_cast<std::size_t>(cfg.encoder_batch);
    const long total_steps =
        cfg.rl_gradient_steps + static_cast<long>(per_epoch) * cfg.epochs;
    train_offline(result.policy, dataset, total_steps, cfg.seed ^ 0x0ff5e7);
    return result;
}

}  // namespace pgcr

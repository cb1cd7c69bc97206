#pragma once

#include "pgcr/agents.hpp"
#include "pgcr/wasserstein.hpp"

namespace pgcr {

/// Pre-trained expert policy, frozen for the whole causal-training phase.
/// The checksum taken at freeze time lets callers prove the expert never
/// moved.
struct ExpertPolicy {
    ActorCritic agent;
    std::string provenance;
    std::uint64_t checksum = 0;

    static ExpertPolicy freeze(ActorCritic trained, std::string provenance) {
        ExpertPolicy e;
        e.agent = std::move(trained);
        e.provenance = std::move(provenance);
        e.checksum = agent_checksum(e.agent);
        return e;
    }

    /// Deterministic expert action (no exploration noise).
    Vec act(const Vec& state) const { return agent.act(state); }

    void verify_frozen() const {
        if (agent_checksum(agent) != checksum)
            throw NumericError("ExpertPolicy: parameters changed while frozen");
    }
};

/// The causal feature-selection agent: an actor-critic whose action space is
/// the intervention action, trained against the exp(-lambda W1) reward.
struct CausalAgent {
    ActorCritic ac;
    CausalRewardConfig reward_cfg;

    Vec intervention(const Vec& state) const { return ac.act(state); }
};

inline CausalAgent make_causal_agent(const SynthRecEnv& env, AgentKind kind,
                                     const AgentConfig& agent_cfg,
                                     const CausalRewardConfig& reward_cfg, Rng& rng) {
    reward_cfg.validate();
    CausalAgent agent;
    agent.ac = make_agent(kind, env.state_dim(), env.action_dim, agent_cfg, rng);
    agent.reward_cfg = reward_cfg;
    return agent;
}

struct CollectResult {
    Transition dc_transition;  // (s_t, a^I, r, s^I) for the causal replay D_c
    Vec next_state;            // expert-trajectory successor
    bool episode_done = false;
    double w1 = 0.0;
    double expert_reward = 0.0;
};

/// One body of the Algorithm-1 loop:
///   (i)   the expert acts a_t on s_t; r_t enters R
///   (ii)  the causal agent intervenes with a^I; the environment yields s^I
///   (iii) the expert re-executes the SAME a_t on s^I; r-hat enters R-hat
///   (iv)  r = exp(-lambda W1(R-hat, R)), or 1.0 until both buffers hold
///         min_fill paired samples
///   (v)   (s_t, a^I, s^I, r) is returned for storage in D_c
inline CollectResult collect_step(const ExpertPolicy& expert, const CausalAgent& causal,
                                  const SynthRecEnv& env, const Vec& state, int t,
                                  EmpiricalSamples& reward_buf, EmpiricalSamples& reward_hat_buf,
                                  bool explore, Rng& rng) {
    require(state.size() == env.state_dim(), "collect_step: state dim mismatch");
    require(causal.ac.action_dim == env.action_dim,
            "collect_step: intervention action dim must equal the env action dim");

    const Vec expert_action = expert.act(state);
    const StepResult sr = step(env, state, expert_action, t, rng);
    reward_buf.push(sr.reward);

    const Vec a_intervened = select_action(causal.ac, state, explore, rng);
    const Vec modified = apply_intervention(env, state, a_intervened, rng);

    const double reward_hat = reward(env, modified, expert_action);
    reward_hat_buf.push(reward_hat);

    CollectResult out;
    out.expert_reward = sr.reward;
    if (reward_buf.size() >= causal.reward_cfg.min_fill &&
        reward_hat_buf.size() >= causal.reward_cfg.min_fill) {
        out.w1 = w1_empirical(reward_hat_buf, reward_buf);
        out.dc_transition.reward = causal_reward(out.w1, causal.reward_cfg);
    } else {
        out.w1 = 0.0;
        out.dc_transition.reward = 1.0;  // cold start until the buffers fill
    }
    out.dc_transition.state = state;
    out.dc_transition.action = a_intervened;
    out.dc_transition.next_state = modified;
    out.dc_transition.done = sr.done;
    out.dc_transition.t = t;
    out.next_state = sr.next_state;
    out.episode_done = sr.done;
    return out;
}

struct CausalTracePoint {
    long step = 0;
    double w1 = 0.0;
    double reward = 0.0;
};

struct CausalTrainResult {
    CausalAgent agent;
    std::vector<CausalTracePoint> trace;  // one point per collect step
};

/// Algorithm 1: E episodes of T collect steps with interleaved off-policy
/// updates on D_c. The reward buffers persist across episodes as sliding
/// windows. Deterministic given the seed; the expert is verified unchanged.
inline CausalTrainResult train_causal_policy(const SynthRecEnv& env, const ExpertPolicy& expert,
                                             int episodes, int horizon, AgentKind kind,
                                             const AgentConfig& agent_cfg,
                                             const CausalRewardConfig& reward_cfg,
                                             std::uint64_t seed) {
    env.validate();
    require(episodes >= 1 && horizon >= 1, "train_causal_policy: E and T must be at least 1");
    Rng rng(splitmix64(seed ^ 0xca5a1));

    CausalTrainResult result{make_causal_agent(env, kind, agent_cfg, reward_cfg, rng), {}};
    CausalAgent& causal = result.agent;
    ReplayBuffer dc(agent_cfg.buffer_capacity);
    EmpiricalSamples reward_buf(reward_cfg.window), reward_hat_buf(reward_cfg.window);

    long global_step = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        Vec state = initial_state(env, rng);
        for (int t = 0; t < horizon; ++t) {
            const bool warm = dc.size() < static_cast<std::size_t>(agent_cfg.warmup);
            CollectResult cr =
                collect_step(expert, causal, env, state, t, reward_buf, reward_hat_buf,
                             /*explore=*/true, rng);
            cr.dc_transition.episode_id = ep;
            dc.push(cr.dc_transition);
            result.trace.push_back({global_step, cr.w1, cr.dc_transition.reward});
            ++global_step;

            if (!warm && dc.size() >= static_cast<std::size_t>(agent_cfg.batch))
                agent_update(causal.ac, dc.sample(static_cast<std::size_t>(agent_cfg.batch), rng));

            if (cr.episode_done) break;
            state = cr.next_state;
        }
    }
    expert.verify_frozen();
    return result;
}

/// Mean CRC displacement of modified states relative to the expert successor,
/// over held-out states with shared noise draws. Used to compare a trained
/// causal policy against random interventions on ground-truth labels.
template <typename InterventionFn>
double crc_preservation_error(const SynthRecEnv& env, const ExpertPolicy& expert,
                              InterventionFn&& intervene_at, int n_states, std::uint64_t seed) {
    double total = 0.0;
    for (int i = 0; i < n_states; ++i) {
        Rng state_rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
        const Vec state = initial_state(env, state_rng);
        const Vec a_expert = expert.act(state);
        const Vec a_int = intervene_at(state, state_rng);
        Rng noise_a = Rng::derive(seed ^ 0xabcd, static_cast<std::uint64_t>(i));
        Rng noise_b = Rng::derive(seed ^ 0xabcd, static_cast<std::uint64_t>(i));
        const Vec successor = step(env, state, a_expert, 0, noise_a).next_state;
        const Vec modified = apply_intervention(env, state, a_int, noise_b);
        total += (modified.head(env.d_crc) - successor.head(env.d_crc)).norm();
    }
    return total / n_states;
}

}  // namespace pgcr

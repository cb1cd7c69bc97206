#pragma once

#include "pgcr/checkpoint.hpp"
#include "pgcr/envs.hpp"
#include "pgcr/nn.hpp"

#include <algorithm>
#include <optional>

namespace pgcr {

/// Uniform replay over a fixed-capacity ring; eviction is strictly
/// oldest-first and batches are sampled without replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        require(capacity_ > 0, "ReplayBuffer: capacity must be positive");
    }

    void push(Transition tr) {
        if (storage_.size() < capacity_) {
            storage_.push_back(std::move(tr));
        } else {
            storage_[next_] = std::move(tr);
        }
        next_ = (next_ + 1) % capacity_;
    }

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return storage_.at(i); }

    std::vector<Transition> sample(std::size_t batch, Rng& rng) const {
        require(batch > 0 && batch <= storage_.size(),
                "ReplayBuffer::sample: batch must fit the stored data");
        std::vector<std::size_t> picked;
        picked.reserve(batch);
        while (picked.size() < batch) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(storage_.size())));
            if (std::find(picked.begin(), picked.end(), idx) == picked.end())
                picked.push_back(idx);
        }
        std::vector<Transition> out;
        out.reserve(batch);
        for (auto idx : picked) out.push_back(storage_[idx]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> storage_;
};

struct AgentConfig {
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double gamma = 0.95;
    double tau = 0.001;
    int batch = 64;
    int hidden = 128;
    std::size_t buffer_capacity = 1'000'000;
    double exploration_sigma = 0.1;
    int td3_policy_delay = 2;
    double td3_target_noise = 0.2;
    double td3_noise_clip = 0.5;
    int warmup = 1000;

    void validate() const {
        require(gamma >= 0.0 && gamma < 1.0, "AgentConfig: gamma must lie in [0, 1)");
        require(tau > 0.0 && tau <= 1.0, "AgentConfig: tau must lie in (0, 1]");
        require(batch > 0 && hidden > 0 && buffer_capacity > 0 && td3_policy_delay > 0,
                "AgentConfig: sizes must be positive");
        require(actor_lr > 0.0 && critic_lr > 0.0, "AgentConfig: learning rates must be positive");
        require(exploration_sigma >= 0.0 && td3_target_noise >= 0.0 && td3_noise_clip >= 0.0,
                "AgentConfig: noise scales must be nonnegative");
    }
};

enum class AgentKind { Ddpg, Td3 };

inline const char* to_string(AgentKind k) { return k == AgentKind::Ddpg ? "ddpg" : "td3"; }

inline AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "ddpg") return AgentKind::Ddpg;
    if (s == "td3") return AgentKind::Td3;
    throw std::invalid_argument("unknown agent kind: " + s);
}

/// Deterministic-policy actor-critic with target copies. The actor is
/// tanh-bounded into [-1, 1]^action_dim; critics score [state; action]
/// stacks. TD3 adds a twin critic, delayed actor updates and target-action
/// smoothing noise drawn from an internal seeded stream.
struct ActorCritic {
    AgentKind kind = AgentKind::Ddpg;
    int state_dim = 0;
    int action_dim = 0;
    AgentConfig config;

    MlpD actor, actor_target;
    MlpD critic1, critic1_target;
    std::optional<MlpD> critic2, critic2_target;

    AdamStateD actor_opt, critic1_opt, critic2_opt;
    long update_count = 0;
    Rng target_noise_rng{0};

    Vec act(const Vec& state) const {
        require(state.size() == state_dim, "ActorCritic::act: state dim mismatch");
        return forward(actor, state);
    }
};

inline ActorCritic make_agent(AgentKind kind, int state_dim, int action_dim,
                              const AgentConfig& config, Rng& rng) {
    config.validate();
    require(state_dim > 0 && action_dim > 0, "make_agent: dims must be positive");
    ActorCritic agent;
    agent.kind = kind;
    agent.state_dim = state_dim;
    agent.action_dim = action_dim;
    agent.config = config;

    const std::vector<int> actor_sizes = {state_dim, config.hidden, config.hidden, action_dim};
    const std::vector<int> critic_sizes = {state_dim + action_dim, config.hidden, config.hidden, 1};
    agent.actor = MlpD::make(actor_sizes, Activation::Relu, Activation::Tanh, rng);
    agent.actor_target = agent.actor;
    agent.critic1 = MlpD::make(critic_sizes, Activation::Relu, Activation::Identity, rng);
    agent.critic1_target = agent.critic1;
    if (kind == AgentKind::Td3) {
        agent.critic2 = MlpD::make(critic_sizes, Activation::Relu, Activation::Identity, rng);
        agent.critic2_target = agent.critic2;
        agent.critic2_opt = AdamStateD::like(*agent.critic2, config.critic_lr);
    }
    agent.actor_opt = AdamStateD::like(agent.actor, config.actor_lr);
    agent.critic1_opt = AdamStateD::like(agent.critic1, config.critic_lr);
    agent.target_noise_rng = Rng::derive(rng.next_u64(), 0x7d3);
    return agent;
}

/// Deterministic actor output, optionally with clipped Gaussian exploration
/// noise.
inline Vec select_action(const ActorCritic& agent, const Vec& state, bool explore, Rng& rng) {
    Vec action = agent.act(state);
    if (explore && agent.config.exploration_sigma > 0.0)
        action += agent.config.exploration_sigma * rng.normal_vec(agent.action_dim);
    return action.cwiseMax(-1.0).cwiseMin(1.0);
}

struct LossReport {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    double mean_target = 0.0;
    bool actor_updated = false;
};

namespace detail {

struct Batch {
    Mat states, actions, next_states;
    Eigen::RowVectorXd rewards, not_done;
};

inline Batch assemble(const std::vector<Transition>& batch, int state_dim, int action_dim) {
    require(!batch.empty(), "update: batch must be non-empty");
    const auto b = static_cast<Eigen::Index>(batch.size());
    Batch out;
    out.states.resize(state_dim, b);
    out.actions.resize(action_dim, b);
    out.next_states.resize(state_dim, b);
    out.rewards.resize(b);
    out.not_done.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const Transition& tr = batch[static_cast<std::size_t>(i)];
        require(tr.state.size() == state_dim && tr.action.size() == action_dim,
                "update: transition dims do not match the agent");
        out.states.col(i) = tr.state;
        out.actions.col(i) = tr.action;
        out.next_states.col(i) = tr.next_state;
        out.rewards[i] = tr.reward;
        out.not_done[i] = tr.done ? 0.0 : 1.0;
    }
    return out;
}

inline Mat stack(const Mat& states, const Mat& actions) {
    Mat joint(states.rows() + actions.rows(), states.cols());
    joint.topRows(states.rows()) = states;
    joint.bottomRows(actions.rows()) = actions;
    return joint;
}

/// Squared-error critic regression toward `targets`; returns the loss.
inline double critic_step(MlpD& critic, AdamStateD& opt, const Mat& inputs,
                          const Eigen::RowVectorXd& targets) {
    ForwardCacheD cache;
    const Mat q = forward_batch(critic, inputs, &cache);
    const Eigen::RowVectorXd err = q.row(0) - targets;
    const double loss = err.squaredNorm() / static_cast<double>(err.size());
    Mat upstream = (2.0 / static_cast<double>(err.size())) * err;
    adam_step(critic, backward(critic, cache, upstream), opt);
    return loss;
}

/// Ascends mean Q(s, mu(s)) through the critic's input gradient; returns the
/// objective value.
inline double actor_step(ActorCritic& agent, const Mat& states) {
    ForwardCacheD actor_cache;
    const Mat actions = forward_batch(agent.actor, states, &actor_cache);
    ForwardCacheD critic_cache;
    const Mat q = forward_batch(agent.critic1, stack(states, actions), &critic_cache);
    const double objective = q.row(0).mean();

    const Mat upstream_q = Mat::Constant(1, q.cols(), 1.0 / static_cast<double>(q.cols()));
    const GradientsD critic_grads = backward(agent.critic1, critic_cache, upstream_q);
    const Mat dq_da = critic_grads.input.bottomRows(agent.action_dim);
    adam_step(agent.actor, backward(agent.actor, actor_cache, -dq_da), agent.actor_opt);
    return objective;
}

inline void update_targets(ActorCritic& agent) {
    const double tau = agent.config.tau;
    soft_update(agent.actor_target, agent.actor, tau);
    soft_update(agent.critic1_target, agent.critic1, tau);
    if (agent.critic2) soft_update(*agent.critic2_target, *agent.critic2, tau);
}

inline void check_finite(const ActorCritic& agent) {
    const bool ok = agent.actor.all_finite() && agent.critic1.all_finite() &&
                    (!agent.critic2 || agent.critic2->all_finite());
    if (!ok)
        throw NumericError("agent update produced non-finite parameters (diverged); "
                           "lower the learning rates or inspect the reward scale");
}

}  // namespace detail

/// One DDPG update: critic regression to r + gamma (1 - done) Q'(s', mu'(s')),
/// actor ascent on Q(s, mu(s)), Polyak target updates.
inline LossReport ddpg_update(ActorCritic& agent, const std::vector<Transition>& batch) {
    const detail::Batch b = detail::assemble(batch, agent.state_dim, agent.action_dim);

    const Mat next_actions = forward_batch(agent.actor_target, b.next_states);
    const Mat q_next = forward_batch(agent.critic1_target, detail::stack(b.next_states, next_actions));
    const Eigen::RowVectorXd targets =
        b.rewards + agent.config.gamma * b.not_done.cwiseProduct(q_next.row(0));

    LossReport report;
    report.mean_target = targets.mean();
    report.critic_loss =
        detail::critic_step(agent.critic1, agent.critic1_opt, detail::stack(b.states, b.actions), targets);
    report.actor_objective = detail::actor_step(agent, b.states);
    report.actor_updated = true;
    detail::update_targets(agent);
    detail::check_finite(agent);
    ++agent.update_count;
    return report;
}

/// One TD3 update at the given step index: smoothed target actions, twin
/// critics with a min-target, and actor/target updates only on delay
/// boundaries.
inline LossReport td3_update(ActorCritic& agent, const std::vector<Transition>& batch,
                             long step_index) {
    require(agent.critic2.has_value(), "td3_update: agent lacks twin critics");
    const detail::Batch b = detail::assemble(batch, agent.state_dim, agent.action_dim);

    Mat next_actions = forward_batch(agent.actor_target, b.next_states);
    if (agent.config.td3_target_noise > 0.0) {
        for (Eigen::Index k = 0; k < next_actions.size(); ++k) {
            const double noise = std::clamp(
                agent.config.td3_target_noise * agent.target_noise_rng.normal(),
                -agent.config.td3_noise_clip, agent.config.td3_noise_clip);
            next_actions.data()[k] += noise;
        }
        next_actions = next_actions.cwiseMax(-1.0).cwiseMin(1.0);
    }
    const Mat joint_next = detail::stack(b.next_states, next_actions);
    const Mat q1 = forward_batch(agent.critic1_target, joint_next);
    const Mat q2 = forward_batch(*agent.critic2_target, joint_next);
    const Eigen::RowVectorXd targets =
        b.rewards + agent.config.gamma * b.not_done.cwiseProduct(q1.row(0).cwiseMin(q2.row(0)));

    LossReport report;
    report.mean_target = targets.mean();
    const Mat joint = detail::stack(b.states, b.actions);
    report.critic_loss = detail::critic_step(agent.critic1, agent.critic1_opt, joint, targets);
    detail::critic_step(*agent.critic2, agent.critic2_opt, joint, targets);

    if (step_index % agent.config.td3_policy_delay == 0) {
        report.actor_objective = detail::actor_step(agent, b.states);
        report.actor_updated = true;
        detail::update_targets(agent);
    }
    detail::check_finite(agent);
    ++agent.update_count;
    return report;
}

/// Kind-dispatched update; TD3 uses the agent's own update counter as the
/// delay index.
inline LossReport agent_update(ActorCritic& agent, const std::vector<Transition>& batch) {
    return agent.kind == AgentKind::Ddpg ? ddpg_update(agent, batch)
                                         : td3_update(agent, batch, agent.update_count);
}

struct EpisodeStats {
    int episode = 0;
    double total_reward = 0.0;
    int length = 0;
};

using LearningCurve = std::vector<EpisodeStats>;

/// Standard interact / store / sample / update loop; uniform random actions
/// during warmup, one gradient step per environment step afterwards.
inline LearningCurve train_online(ActorCritic& agent, const SynthRecEnv& env, long total_steps,
                                  std::uint64_t seed) {
    env.validate();
    require(total_steps >= 0, "train_online: total_steps must be nonnegative");
    Rng rng(splitmix64(seed ^ 0x0a11ce));
    ReplayBuffer replay(agent.config.buffer_capacity);
    LearningCurve curve;

    Vec state = initial_state(env, rng);
    int t = 0, episode = 0;
    double ep_return = 0.0;
    for (long i = 0; i < total_steps; ++i) {
        const bool warm = replay.size() < static_cast<std::size_t>(agent.config.warmup);
        const Vec action = warm ? rng.uniform_vec(agent.action_dim, -1.0, 1.0)
                                : select_action(agent, state, true, rng);
        const StepResult sr = step(env, state, action, t, rng);
        replay.push({state, action, sr.reward, sr.next_state, sr.done, episode, t});
        ep_return += sr.reward;
        ++t;
        if (sr.done) {
            curve.push_back({episode, ep_return, t});
            ++episode;
            t = 0;
            ep_return = 0.0;
            state = initial_state(env, rng);
        } else {
            state = sr.next_state;
        }
        if (!warm && replay.size() >= static_cast<std::size_t>(agent.config.batch))
            agent_update(agent, replay.sample(static_cast<std::size_t>(agent.config.batch), rng));
    }
    return curve;
}

/// Offline training: the replay is pre-filled from the dataset and never
/// grows; no environment interaction happens.
inline void train_offline(ActorCritic& agent, const OfflineDataset& dataset, long gradient_steps,
                          std::uint64_t seed) {
    require(!dataset.transitions.empty(), "train_offline: dataset must be non-empty");
    require(gradient_steps >= 0, "train_offline: gradient_steps must be nonnegative");
    ReplayBuffer replay(std::max<std::size_t>(agent.config.buffer_capacity,
                                              dataset.transitions.size()));
    for (const auto& tr : dataset.transitions) replay.push(tr);
    Rng rng(splitmix64(seed ^ 0x0ff1ce));
    const auto batch = std::min<std::size_t>(static_cast<std::size_t>(agent.config.batch),
                                             replay.size());
    for (long i = 0; i < gradient_steps; ++i) agent_update(agent, replay.sample(batch, rng));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json agent_config_to_json(const AgentConfig& c) {
    nlohmann::ordered_json j;
    j["actor_lr"] = c.actor_lr;
    j["critic_lr"] = c.critic_lr;
    j["gamma"] = c.gamma;
    j["tau"] = c.tau;
    j["batch"] = c.batch;
    j["hidden"] = c.hidden;
    j["buffer_capacity"] = c.buffer_capacity;
    j["exploration_sigma"] = c.exploration_sigma;
    j["td3_policy_delay"] = c.td3_policy_delay;
    j["td3_target_noise"] = c.td3_target_noise;
    j["td3_noise_clip"] = c.td3_noise_clip;
    j["warmup"] = c.warmup;
    return j;
}

inline AgentConfig agent_config_from_json(const nlohmann::ordered_json& j) {
    AgentConfig c;
    c.actor_lr = j.at("actor_lr").get<double>();
    c.critic_lr = j.at("critic_lr").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.tau = j.at("tau").get<double>();
    c.batch = j.at("batch").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    c.exploration_sigma = j.at("exploration_sigma").get<double>();
    c.td3_policy_delay = j.at("td3_policy_delay").get<int>();
    c.td3_target_noise = j.at("td3_target_noise").get<double>();
    c.td3_noise_clip = j.at("td3_noise_clip").get<double>();
    c.warmup = j.at("warmup").get<int>();
    return c;
}

/// Agent checkpoint: JSON header line, then the online and target networks
/// in a fixed order (mlp format). Optimizer moments are not persisted.
inline void save_agent(const std::string& path, const ActorCritic& agent) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_agent: cannot open " + path);
    nlohmann::ordered_json header;
    header["format"] = "pgcr-agent";
    header["version"] = 1;
    header["kind"] = to_string(agent.kind);
    header["state_dim"] = agent.state_dim;
    header["action_dim"] = agent.action_dim;
    header["update_count"] = agent.update_count;
    header["config"] = agent_config_to_json(agent.config);
    out << header.dump() << '\n';
    write_mlp(out, agent.actor);
    write_mlp(out, agent.actor_target);
    write_mlp(out, agent.critic1);
    write_mlp(out, agent.critic1_target);
    if (agent.kind == AgentKind::Td3) {
        write_mlp(out, *agent.critic2);
        write_mlp(out, *agent.critic2_target);
    }
}

inline ActorCritic load_agent(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_agent: cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "load_agent: missing header");
    const auto header = nlohmann::ordered_json::parse(line);
    require(header.at("format") == "pgcr-agent" && header.at("version") == 1,
            "load_agent: unsupported header");
    ActorCritic agent;
    agent.kind = agent_kind_from_string(header.at("kind").get<std::string>());
    agent.state_dim = header.at("state_dim").get<int>();
    agent.action_dim = header.at("action_dim").get<int>();
    agent.update_count = header.at("update_count").get<long>();
    agent.config = agent_config_from_json(header.at("config"));
    agent.actor = read_mlp(in);
    agent.actor_target = read_mlp(in);
    agent.critic1 = read_mlp(in);
    agent.critic1_target = read_mlp(in);
    if (agent.kind == AgentKind::Td3) {
        agent.critic2 = read_mlp(in);
        agent.critic2_target = read_mlp(in);
        agent.critic2_opt = AdamStateD::like(*agent.critic2, agent.config.critic_lr);
    }
    agent.actor_opt = AdamStateD::like(agent.actor, agent.config.actor_lr);
    agent.critic1_opt = AdamStateD::like(agent.critic1, agent.config.critic_lr);
    return agent;
}

/// FNV-1a over every parameter of every network in the agent.
inline std::uint64_t agent_checksum(const ActorCritic& agent) {
    std::uint64_t h = param_checksum(agent.actor);
    h ^= splitmix64(param_checksum(agent.actor_target));
    h ^= splitmix64(param_checksum(agent.critic1) + 1);
    h ^= splitmix64(param_checksum(agent.critic1_target) + 2);
    if (agent.critic2) {
        h ^= splitmix64(param_checksum(*agent.critic2) + 3);
        h ^= splitmix64(param_checksum(*agent.critic2_target) + 4);
    }
    return h;
}

}  // namespace pgcr

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgcr/agents.hpp"

#include <filesystem>

using namespace pgcr;

namespace {

Transition make_tr(int tag, int state_dim, int action_dim, Rng& rng, double reward,
                   bool done = false) {
    Transition tr;
    tr.state = rng.normal_vec(state_dim);
    tr.action = rng.uniform_vec(action_dim, -1.0, 1.0);
    tr.reward = reward;
    tr.next_state = rng.normal_vec(state_dim);
    tr.done = done;
    tr.episode_id = tag;
    tr.t = 0;
    return tr;
}

AgentConfig small_config() {
    AgentConfig cfg;
    cfg.hidden = 32;
    cfg.batch = 16;
    cfg.buffer_capacity = 10000;
    cfg.actor_lr = 1e-3;
    cfg.critic_lr = 1e-3;
    cfg.warmup = 100;
    return cfg;
}

/// 1-step environment: reward bias - |T s - a|^2 - c |a|^2 with per-state
/// analytic optimum a_j = clamp(t_j / (1 + c), -1, 1), t = T s.
SynthRecEnv bandit_env() {
    SynthRecEnv env;
    env.d_crc = 2;
    env.d_circ = 0;
    env.action_dim = 2;
    env.horizon = 1;
    env.trans_noise = 0.0;
    env.circ_noise = 0.0;
    env.step_scale = 0.0;
    env.action_cost = 0.25;
    env.reward_bias = 0.5;
    env.target_map = (Mat(2, 2) << 0.6, 0.2, -0.3, 0.5).finished();
    env.crc_mix = Mat::Zero(2, 2);
    env.crc_in = Mat::Zero(2, 2);
    env.crc_drift = Vec::Zero(2);
    env.circ_mix = Mat::Zero(0, 0);
    return env;
}

/// Analytic optimum evaluated with explicit per-dimension arithmetic.
double bandit_optimal_mean_return(const SynthRecEnv& env, int samples, std::uint64_t seed) {
    Rng rng(seed);
    double total = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Vec s = initial_state(env, rng);
        double r = env.reward_bias;
        for (int j = 0; j < env.action_dim; ++j) {
            double t_j = 0.0;
            for (int k = 0; k < env.state_dim(); ++k) t_j += env.target_map(j, k) * s[k];
            const double a_j = std::clamp(t_j / (1.0 + env.action_cost), -1.0, 1.0);
            r -= (t_j - a_j) * (t_j - a_j) + env.action_cost * a_j * a_j;
        }
        total += r;
    }
    return total / samples;
}

}  // namespace

TEST_CASE("replay evicts oldest entries first") {
    ReplayBuffer buf(5);
    Rng rng(1);
    for (int i = 0; i < 8; ++i) buf.push(make_tr(i, 2, 1, rng, i));
    REQUIRE(buf.size() == 5);
    std::vector<int> tags;
    for (std::size_t i = 0; i < buf.size(); ++i) tags.push_back(buf.at(i).episode_id);
    std::sort(tags.begin(), tags.end());
    CHECK(tags == std::vector<int>{3, 4, 5, 6, 7});
}

TEST_CASE("full-size batch samples every element exactly once") {
    ReplayBuffer buf(10);
    Rng rng(2);
    for (int i = 0; i < 10; ++i) buf.push(make_tr(i, 2, 1, rng, i));
    const auto batch = buf.sample(10, rng);
    std::vector<int> tags;
    for (const auto& tr : batch) tags.push_back(tr.episode_id);
    std::sort(tags.begin(), tags.end());
    std::vector<int> expected(10);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(tags == expected);
    CHECK_THROWS_AS(buf.sample(11, rng), std::invalid_argument);
}

TEST_CASE("select_action is deterministic without exploration and always bounded") {
    Rng rng(3);
    const ActorCritic agent = make_agent(AgentKind::Ddpg, 4, 3, small_config(), rng);
    const Vec state = rng.normal_vec(4);
    Rng r1(9), r2(9);
    CHECK((select_action(agent, state, false, r1) - select_action(agent, state, false, r2))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    for (int i = 0; i < 200; ++i) {
        const Vec a = select_action(agent, state, true, rng);
        CHECK(a.maxCoeff() <= 1.0);
        CHECK(a.minCoeff() >= -1.0);
    }
}

TEST_CASE("exploration noise has the configured scale") {
    Rng rng(4);
    AgentConfig cfg = small_config();
    cfg.exploration_sigma = 0.1;
    ActorCritic agent = make_agent(AgentKind::Ddpg, 3, 2, cfg, rng);
    // zero the actor so outputs sit at tanh(0) = 0 and clipping never bites
    for (auto& l : agent.actor.layers) {
        l.w.setZero();
        l.b.setZero();
    }
    const Vec state = Vec::Zero(3);
    const int n = 10000;
    std::vector<double> draws;
    for (int i = 0; i < n; ++i) {
        const Vec a = select_action(agent, state, true, rng);
        draws.push_back(a[0]);
        draws.push_back(a[1]);
    }
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= draws.size();
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= (draws.size() - 1);
    const double sd = std::sqrt(var);
    const double se = 0.1 / std::sqrt(2.0 * draws.size());
    CHECK(std::abs(sd - 0.1) <= 3.0 * se + 1e-4);
}

TEST_CASE("gamma zero makes the critic target equal the reward") {
    Rng rng(5);
    AgentConfig cfg = small_config();
    cfg.gamma = 0.0;
    ActorCritic agent = make_agent(AgentKind::Ddpg, 3, 2, cfg, rng);
    std::vector<Transition> batch;
    double reward_sum = 0.0;
    for (int i = 0; i < 8; ++i) {
        batch.push_back(make_tr(i, 3, 2, rng, rng.uniform(-1.0, 1.0)));
        reward_sum += batch.back().reward;
    }
    const LossReport report = ddpg_update(agent, batch);
    CHECK(report.mean_target == doctest::Approx(reward_sum / 8.0).epsilon(1e-12));
}

TEST_CASE("critic overfits a fixed batch") {
    Rng rng(6);
    AgentConfig cfg = small_config();
    cfg.gamma = 0.0;  // fixed targets, so the actor cannot move them
    ActorCritic agent = make_agent(AgentKind::Ddpg, 3, 2, cfg, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(make_tr(i, 3, 2, rng, rng.uniform(-1.0, 1.0)));
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 200; ++i) {
        const LossReport r = ddpg_update(agent, batch);
        if (i == 0) first = r.critic_loss;
        last = r.critic_loss;
    }
    CHECK(last < 0.1 * first);
}

TEST_CASE("polyak targets contract toward a frozen online network") {
    Rng rng(7);
    ActorCritic agent = make_agent(AgentKind::Ddpg, 3, 2, small_config(), rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(make_tr(i, 3, 2, rng, rng.uniform(-1.0, 1.0)));
    ddpg_update(agent, batch);  // targets now lag the online nets
    const double before = param_distance(agent.critic1_target, agent.critic1);
    REQUIRE(before > 0.0);
    detail::update_targets(agent);  // online frozen, targets move again
    CHECK(param_distance(agent.critic1_target, agent.critic1) < before);
}

TEST_CASE("td3 with zero noise, delay 1 and identical twins reduces to ddpg") {
    AgentConfig cfg = small_config();
    cfg.td3_target_noise = 0.0;
    cfg.td3_policy_delay = 1;

    Rng rng_ddpg(88), rng_td3(88);
    ActorCritic ddpg = make_agent(AgentKind::Ddpg, 3, 2, cfg, rng_ddpg);
    ActorCritic td3 = make_agent(AgentKind::Td3, 3, 2, cfg, rng_td3);
    // same seed gives identical actor/critic1; twin the critics explicitly
    td3.critic2 = td3.critic1;
    td3.critic2_target = td3.critic1_target;
    td3.critic2_opt = AdamStateD::like(*td3.critic2, cfg.critic_lr);
    REQUIRE(param_checksum(ddpg.actor) == param_checksum(td3.actor));
    REQUIRE(param_checksum(ddpg.critic1) == param_checksum(td3.critic1));

    Rng batch_rng(99);
    for (int round = 0; round < 5; ++round) {
        std::vector<Transition> batch;
        for (int i = 0; i < 8; ++i)
            batch.push_back(make_tr(i, 3, 2, batch_rng, batch_rng.uniform(-1.0, 1.0), i == 3));
        const LossReport a = ddpg_update(ddpg, batch);
        const LossReport b = td3_update(td3, batch, round);
        CHECK(std::abs(a.critic_loss - b.critic_loss) <= 1e-12);
        CHECK(std::abs(a.mean_target - b.mean_target) <= 1e-12);
    }
    CHECK(param_distance(ddpg.actor, td3.actor) <= 1e-12);
    CHECK(param_distance(ddpg.critic1, td3.critic1) <= 1e-12);
    CHECK(param_distance(*td3.critic2, td3.critic1) <= 1e-12);
}

TEST_CASE("td3 keeps the actor frozen off the delay boundary") {
    Rng rng(9);
    AgentConfig cfg = small_config();
    cfg.td3_policy_delay = 2;
    ActorCritic agent = make_agent(AgentKind::Td3, 3, 2, cfg, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(make_tr(i, 3, 2, rng, rng.uniform(-1.0, 1.0)));
    const std::uint64_t before = param_checksum(agent.actor);
    const LossReport r = td3_update(agent, batch, 1);  // 1 % 2 != 0
    CHECK_FALSE(r.actor_updated);
    CHECK(param_checksum(agent.actor) == before);
    const LossReport r2 = td3_update(agent, batch, 2);
    CHECK(r2.actor_updated);
    CHECK(param_checksum(agent.actor) != before);
}

TEST_CASE("min of twin targets never exceeds either twin") {
    Rng rng(10);
    ActorCritic agent = make_agent(AgentKind::Td3, 3, 2, small_config(), rng);
    Mat states(3, 16), actions(2, 16);
    for (Eigen::Index k = 0; k < states.size(); ++k) states.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < actions.size(); ++k) actions.data()[k] = rng.normal();
    const Mat joint = detail::stack(states, actions);
    const Mat q1 = forward_batch(agent.critic1_target, joint);
    const Mat q2 = forward_batch(*agent.critic2_target, joint);
    const Eigen::RowVectorXd m = q1.row(0).cwiseMin(q2.row(0));
    CHECK((m.array() <= q1.row(0).array() + 1e-15).all());
    CHECK((m.array() <= q2.row(0).array() + 1e-15).all());
}

TEST_CASE("online training approaches the bandit optimum") {
    const SynthRecEnv env = bandit_env();
    const double optimum = bandit_optimal_mean_return(env, 200000, 424242);
    REQUIRE(optimum > 0.01);

    int successes = 0;
    for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
        AgentConfig cfg = small_config();
        cfg.gamma = 0.0;
        cfg.exploration_sigma = 0.05;  // the curve tail includes this noise
        cfg.warmup = 200;
        cfg.batch = 64;
        cfg.tau = 0.01;
        Rng rng(seed);
        ActorCritic agent = make_agent(AgentKind::Ddpg, env.state_dim(), env.action_dim, cfg, rng);
        const LearningCurve curve = train_online(agent, env, 6000, seed);
        REQUIRE(!curve.empty());
        const std::size_t tail = std::max<std::size_t>(1, curve.size() / 10);
        double tail_mean = 0.0;
        for (std::size_t i = curve.size() - tail; i < curve.size(); ++i)
            tail_mean += curve[i].total_reward;
        tail_mean /= tail;
        if (std::abs(tail_mean - optimum) <= 0.1 * std::abs(optimum)) ++successes;
    }
    CHECK(successes >= 4);
}

TEST_CASE("zero training steps leave the agent unchanged") {
    Rng rng(12);
    ActorCritic agent = make_agent(AgentKind::Ddpg, 4, 2, small_config(), rng);
    const std::uint64_t before = agent_checksum(agent);
    const SynthRecEnv env = make_default_env(3);
    SynthRecEnv sized = env;
    sized.d_crc = 2;
    sized.d_circ = 2;
    sized.action_dim = 2;
    sized.target_map = Mat::Zero(2, 4);
    sized.target_map.leftCols(2).setConstant(0.1);
    sized.crc_mix = Mat::Zero(2, 2);
    sized.crc_in = Mat::Zero(2, 2);
    sized.crc_drift = Vec::Zero(2);
    sized.circ_mix = Mat::Identity(2, 2) * 0.5;
    const LearningCurve curve = train_online(agent, sized, 0, 7);
    CHECK(curve.empty());
    CHECK(agent_checksum(agent) == before);
}

TEST_CASE("learning curve has one entry per completed episode") {
    SynthRecEnv env = bandit_env();
    env.horizon = 4;
    Rng rng(13);
    AgentConfig cfg = small_config();
    cfg.warmup = 10;
    ActorCritic agent = make_agent(AgentKind::Ddpg, env.state_dim(), env.action_dim, cfg, rng);
    const LearningCurve curve = train_online(agent, env, 41, 5);
    CHECK(curve.size() == 10);  // 41 steps of horizon-4 episodes complete 10
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].episode == static_cast<int>(i));
        CHECK(curve[i].length == 4);
    }
}

TEST_CASE("offline training on expert data beats the random policy") {
    SynthRecEnv env = bandit_env();
    env.horizon = 5;

    auto rollout_mean = [&](const std::function<Vec(const Vec&, Rng&)>& policy, std::uint64_t seed) {
        Rng rng(seed);
        double total = 0.0;
        const int episodes = 200;
        for (int ep = 0; ep < episodes; ++ep) {
            Vec state = initial_state(env, rng);
            for (int t = 0; t < env.horizon; ++t) {
                const Vec a = policy(state, rng);
                const StepResult sr = step(env, state, a, t, rng);
                total += sr.reward;
                state = sr.next_state;
            }
        }
        return total / episodes;
    };

    // expert demonstrations from the analytic optimum plus exploration noise
    const BehaviorPolicy expert = [&](const Vec& s, Rng& rng) -> Vec {
        Vec a = optimal_action(env, s) + 0.3 * rng.normal_vec(env.action_dim);
        return a.cwiseMax(-1.0).cwiseMin(1.0);
    };
    const OfflineDataset data = generate_offline_dataset(env, expert, 300, 909, "expert");

    const double random_mean =
        rollout_mean([&](const Vec&, Rng& rng) { return rng.uniform_vec(2, -1.0, 1.0); }, 1000);

    int wins = 0;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        AgentConfig cfg = small_config();
        cfg.gamma = 0.0;
        cfg.batch = 64;
        Rng rng(seed);
        ActorCritic agent = make_agent(AgentKind::Ddpg, env.state_dim(), env.action_dim, cfg, rng);
        train_offline(agent, data, 1500, seed);
        const double trained_mean = rollout_mean(
            [&](const Vec& s, Rng& rng2) { return select_action(agent, s, false, rng2); },
            2000 + seed);
        if (trained_mean > random_mean) ++wins;
    }
    CHECK(wins >= 4);
}

TEST_CASE("offline training is deterministic and zero steps change nothing") {
    SynthRecEnv env = bandit_env();
    const OfflineDataset data =
        generate_offline_dataset(env, uniform_random_policy(2), 50, 31337, "random");

    AgentConfig cfg = small_config();
    Rng r1(77), r2(77);
    ActorCritic a1 = make_agent(AgentKind::Ddpg, env.state_dim(), env.action_dim, cfg, r1);
    ActorCritic a2 = make_agent(AgentKind::Ddpg, env.state_dim(), env.action_dim, cfg, r2);
    const std::uint64_t before = agent_checksum(a1);

    train_offline(a1, data, 0, 5);
    CHECK(agent_checksum(a1) == before);

    train_offline(a1, data, 200, 5);
    train_offline(a2, data, 200, 5);
    CHECK(agent_checksum(a1) == agent_checksum(a2));

    const std::string path = (std::filesystem::temp_directory_path() / "pgcr_agent_ck.bin").string();
    save_agent(path, a1);
    const ActorCritic loaded = load_agent(path);
    CHECK(param_checksum(loaded.actor) == param_checksum(a1.actor));
    CHECK(param_checksum(loaded.critic1) == param_checksum(a1.critic1));
    CHECK(param_checksum(loaded.actor_target) == param_checksum(a1.actor_target));

    save_agent(path + ".2", loaded);
    std::ifstream f1(path, std::ios::binary), f2(path + ".2", std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".2");

    OfflineDataset empty;
    CHECK_THROWS_AS(train_offline(a1, empty, 10, 1), std::invalid_argument);
}

TEST_CASE("divergence surfaces as a numeric error") {
    Rng rng(14);
    AgentConfig cfg = small_config();
    ActorCritic agent = make_agent(AgentKind::Ddpg, 2, 1, cfg, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(make_tr(i, 2, 1, rng, 1.0));
    batch[0].reward = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ddpg_update(agent, batch), NumericError);
}

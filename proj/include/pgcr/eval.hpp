#pragma once

#include "pgcr/pgcr.hpp"

#include <iostream>
#include <mutex>
#include <thread>

namespace pgcr {

/// Aggregated evaluation metrics; cumulative and average reward plus
/// interaction length, each mean +- sample std over episodes.
struct Metrics {
    double cumulative_mean = 0.0, cumulative_std = 0.0;
    double average_mean = 0.0, average_std = 0.0;
    double length_mean = 0.0, length_std = 0.0;
    int n_episodes = 0;
    std::vector<std::uint64_t> seeds;

    static Metrics from_episodes(const std::vector<double>& returns,
                                 const std::vector<int>& lengths,
                                 std::vector<std::uint64_t> seeds_used) {
        require(!returns.empty() && returns.size() == lengths.size(),
                "Metrics: episode lists must be non-empty and aligned");
        Metrics m;
        m.n_episodes = static_cast<int>(returns.size());
        m.seeds = std::move(seeds_used);
        std::vector<double> averages(returns.size());
        for (std::size_t i = 0; i < returns.size(); ++i) {
            require(lengths[i] > 0, "Metrics: zero-length episode");
            averages[i] = returns[i] / lengths[i];
            require(std::abs(averages[i] * lengths[i] - returns[i]) <= 1e-9,
                    "Metrics: per-episode identity violated");
        }
        auto mean_std = [](const std::vector<double>& xs, double& mean, double& std_out) {
            mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            std_out = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        };
        std::vector<double> lens(lengths.begin(), lengths.end());
        mean_std(returns, m.cumulative_mean, m.cumulative_std);
        mean_std(averages, m.average_mean, m.average_std);
        mean_std(lens, m.length_mean, m.length_std);
        return m;
    }
};

struct EpisodeRollouts {
    std::vector<double> returns;
    std::vector<int> lengths;
};

/// Deterministic (noise-free) rollouts of a policy, through the encoder when
/// one is given.
inline EpisodeRollouts rollout_episodes(const ActorCritic& policy, const Encoder* encoder,
                                        const SynthRecEnv& env, int n_episodes,
                                        std::uint64_t seed) {
    env.validate();
    require(n_episodes >= 1, "rollout_episodes: need at least one episode");
    EpisodeRollouts out;
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(ep));
        Vec state = initial_state(env, rng);
        double total = 0.0;
        int length = 0;
        for (int t = 0; t < env.horizon; ++t) {
            Vec action = encoder ? act_latent(policy, *encoder, state) : policy.act(state);
            if (env.item_catalog) action = nearest_catalog_action(env, action);
            const StepResult sr = step(env, state, action, t, rng);
            total += sr.reward;
            ++length;
            if (sr.done) break;
            state = sr.next_state;
        }
        out.returns.push_back(total);
        out.lengths.push_back(length);
    }
    return out;
}

inline Metrics evaluate(const ActorCritic& policy, const Encoder* encoder, const SynthRecEnv& env,
                        int n_episodes, std::uint64_t seed) {
    const EpisodeRollouts r = rollout_episodes(policy, encoder, env, n_episodes, seed);
    return Metrics::from_episodes(r.returns, r.lengths, {seed});
}

/// CIRC-to-CRC perturbation response ratio of an encoder:
///   mean_{j in CIRC} E|phi(s) - phi(s + delta e_j)|
///   -----------------------------------------------
///   mean_{j in CRC}  E|phi(s) - phi(s + delta e_j)|
/// An encoder that ignores irrelevant features drives this toward zero; the
/// identity map scores exactly one.
inline double circ_sensitivity(const Encoder& encoder, const SynthRecEnv& env, int n_probes,
                               double delta, std::uint64_t seed) {
    require(delta > 0.0, "circ_sensitivity: delta must be positive");
    require(n_probes >= 1, "circ_sensitivity: need at least one probe");
    require(env.d_circ > 0 && env.d_crc > 0, "circ_sensitivity: needs both CRC and CIRC dims");
    Rng rng(splitmix64(seed ^ 0x5e75));
    double crc_response = 0.0, circ_response = 0.0;
    for (int i = 0; i < n_probes; ++i) {
        const Vec s = initial_state(env, rng);
        const Vec z = encoder.encode(s);
        for (int j = 0; j < env.state_dim(); ++j) {
            Vec perturbed = s;
            perturbed[j] += delta;
            const double response = (encoder.encode(perturbed) - z).norm();
            if (j < env.d_crc)
                crc_response += response;
            else
                circ_response += response;
        }
    }
    crc_response /= static_cast<double>(n_probes * env.d_crc);
    circ_response /= static_cast<double>(n_probes * env.d_circ);
    if (crc_response == 0.0) {
        std::cerr << "circ_sensitivity: zero CRC response; reporting +inf\n";
        return std::numeric_limits<double>::infinity();
    }
    return circ_response / crc_response;
}

// ---------------------------------------------------------------------------
// Full pipeline, ablation and sweep
// ---------------------------------------------------------------------------

/// Everything needed to run expert training, data collection, causal
/// training, PGCR and evaluation end to end.
struct PipelineConfig {
    SynthRecEnv env = make_default_env(0);
    AgentConfig agent;
    CausalRewardConfig reward_cfg;
    PgcrConfig pgcr;
    AgentKind kind = AgentKind::Ddpg;
    long expert_steps = 8000;
    double behavior_noise = 0.2;  // exploration noise of the data-collection policy
    int data_episodes = 150;
    int causal_episodes = 60;
    int causal_horizon = 20;
    int eval_episodes = 30;
};

struct PipelineArtifacts {
    ExpertPolicy expert;
    OfflineDataset dataset;
    CausalTrainResult causal;
    PgcrTrainResult pgcr;
    Metrics metrics;
};

/// Expert phase only: online training then freezing.
inline ExpertPolicy train_expert(const PipelineConfig& cfg, std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0xe9e47));
    ActorCritic agent =
        make_agent(AgentKind::Ddpg, cfg.env.state_dim(), cfg.env.action_dim, cfg.agent, rng);
    train_online(agent, cfg.env, cfg.expert_steps, seed);
    return ExpertPolicy::freeze(std::move(agent), "online-ddpg");
}

/// Expert-with-noise demonstrations, the paper's data-collection scheme.
inline OfflineDataset collect_demonstrations(const PipelineConfig& cfg, const ExpertPolicy& expert,
                                             std::uint64_t seed) {
    const double noise = cfg.behavior_noise;
    const BehaviorPolicy behavior = [&expert, noise](const Vec& s, Rng& rng) -> Vec {
        Vec a = expert.act(s) + noise * rng.normal_vec(static_cast<int>(expert.act(s).size()));
        return a.cwiseMax(-1.0).cwiseMin(1.0);
    };
    return generate_offline_dataset(cfg.env, behavior, cfg.data_episodes, seed, "expert-noise");
}

/// The full PGCR pipeline for one seed and one lambda.
inline PipelineArtifacts run_pipeline(PipelineConfig cfg, double lambda, std::uint64_t seed) {
    cfg.reward_cfg.lambda = lambda;
    cfg.pgcr.seed = seed;
    PipelineArtifacts art{train_expert(cfg, seed),
                          {},
                          {CausalAgent{}, {}},
                          {},
                          {}};
    art.dataset = collect_demonstrations(cfg, art.expert, splitmix64(seed ^ 0xda7a));
    art.causal = train_causal_policy(cfg.env, art.expert, cfg.causal_episodes, cfg.causal_horizon,
                                     AgentKind::Ddpg, cfg.agent, cfg.reward_cfg, seed);
    art.pgcr = train_pgcr(art.dataset, art.causal.agent, cfg.env, cfg.kind, cfg.pgcr, cfg.agent);
    art.metrics = evaluate(art.pgcr.policy, &art.pgcr.encoder, cfg.env, cfg.eval_episodes,
                           splitmix64(seed ^ 0xe7a1));
    return art;
}

/// PGCR-C: the causal agent is replaced by uniformly sampled dataset states.
inline Metrics ablate_random_state(const OfflineDataset& dataset, const SynthRecEnv& env,
                                   AgentKind kind, const PgcrConfig& cfg,
                                   const AgentConfig& agent_cfg, int eval_episodes,
                                   std::uint64_t seed) {
    PgcrConfig c = cfg;
    c.seed = seed;
    const PgcrTrainResult trained =
        train_pgcr_with_provider(dataset, random_state_provider(dataset), kind, c, agent_cfg);
    return evaluate(trained.policy, &trained.encoder, env, eval_episodes,
                    splitmix64(seed ^ 0xe7a1));
}

struct SweepRow {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    Metrics metrics;
};

struct SweepResult {
    std::vector<double> lambdas;          // ascending
    std::vector<Metrics> per_lambda;      // pooled over seeds, aligned with lambdas
    std::vector<SweepRow> rows;           // one row per (lambda, seed)
    double winner_lambda = 0.0;
};

/// Retrains causal agent + PGCR per lambda per seed. The expert and dataset
/// are trained once per seed (they do not depend on lambda). Runs fan out
/// over `jobs` threads; each run owns its rng streams, so the result is
/// independent of scheduling.
inline SweepResult sweep_lambda(std::vector<double> lambdas, const PipelineConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, int jobs = 1) {
    require(!lambdas.empty() && !seeds.empty(), "sweep_lambda: need lambdas and seeds");
    for (double l : lambdas)
        require(l > 0.0 && l <= 1.0, "sweep_lambda: lambda must lie in (0, 1]");
    std::sort(lambdas.begin(), lambdas.end());
    require(std::adjacent_find(lambdas.begin(), lambdas.end()) == lambdas.end(),
            "sweep_lambda: duplicate lambda");

    struct SeedRun {
        ExpertPolicy expert;
        OfflineDataset dataset;
    };
    std::vector<SeedRun> shared(seeds.size());
    std::vector<SweepRow> rows(lambdas.size() * seeds.size());

    auto run_seed = [&](std::size_t si) {
        PipelineConfig local = cfg;
        const std::uint64_t seed = seeds[si];
        shared[si].expert = train_expert(local, seed);
        shared[si].dataset =
            collect_demonstrations(local, shared[si].expert, splitmix64(seed ^ 0xda7a));
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            PipelineConfig run_cfg = cfg;
            run_cfg.reward_cfg.lambda = lambdas[li];
            run_cfg.pgcr.seed = seed;
            const CausalTrainResult causal =
                train_causal_policy(run_cfg.env, shared[si].expert, run_cfg.causal_episodes,
                                    run_cfg.causal_horizon, AgentKind::Ddpg, run_cfg.agent,
                                    run_cfg.reward_cfg, seed);
            const PgcrTrainResult trained = train_pgcr(shared[si].dataset, causal.agent,
                                                       run_cfg.env, run_cfg.kind, run_cfg.pgcr,
                                                       run_cfg.agent);
            const Metrics m = evaluate(trained.policy, &trained.encoder, run_cfg.env,
                                       run_cfg.eval_episodes, splitmix64(seed ^ 0xe7a1));
            rows[li * seeds.size() + si] = {lambdas[li], seed, m};
        }
    };

    if (jobs <= 1) {
        for (std::size_t si = 0; si < seeds.size(); ++si) run_seed(si);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), seeds.size());
        std::mutex mtx;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t si;
                    {
                        std::lock_guard<std::mutex> lock(mtx);
                        if (next >= seeds.size()) return;
                        si = next++;
                    }
                    run_seed(si);
                }
            });
        for (auto& th : pool) th.join();
    }

    SweepResult result;
    result.lambdas = lambdas;
    result.rows = rows;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        std::vector<double> returns;
        std::vector<int> lengths;
        std::vector<std::uint64_t> used;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Metrics& m = rows[li * seeds.size() + si].metrics;
            // pool per-seed aggregates weighted by episode counts
            returns.push_back(m.cumulative_mean);
            lengths.push_back(std::max(1, static_cast<int>(std::lround(m.length_mean))));
            used.push_back(seeds[si]);
        }
        // per-lambda metrics over seed-level means
        std::vector<double> rs = returns;
        std::vector<int> ls = lengths;
        Metrics pooled;
        {
            std::vector<double> averages(rs.size());
            for (std::size_t i = 0; i < rs.size(); ++i) averages[i] = rs[i] / ls[i];
            pooled.n_episodes = static_cast<int>(rs.size());
            pooled.seeds = used;
            auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
                mean = 0.0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                double ss = 0.0;
                for (double x : xs) ss += (x - mean) * (x - mean);
                sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
            };
            std::vector<double> lens(ls.begin(), ls.end());
            mean_std(rs, pooled.cumulative_mean, pooled.cumulative_std);
            mean_std(averages, pooled.average_mean, pooled.average_std);
            mean_std(lens, pooled.length_mean, pooled.length_std);
        }
        result.per_lambda.push_back(pooled);
        if (pooled.cumulative_mean > best) {
            best = pooled.cumulative_mean;
            result.winner_lambda = lambdas[li];  // ascending order: ties keep the smaller
        }
    }
    return result;
}

}  // namespace pgcr

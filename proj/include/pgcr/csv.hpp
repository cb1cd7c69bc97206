#pragma once

#include "pgcr/causal_policy.hpp"
#include "pgcr/eval.hpp"

#include <cstdio>
#include <fstream>

namespace pgcr {

/// Formats a double with enough digits to round-trip exactly.
inline std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_text_file: cannot open " + path);
    out << content;
}

inline constexpr const char* kMetricsCsvHeader =
    "run_id,algorithm,variant,lambda,seed,cumulative_mean,cumulative_std,"
    "average_mean,average_std,length_mean,length_std";

inline std::string metrics_csv_row(const std::string& run_id, const std::string& algorithm,
                                   const std::string& variant, double lambda, std::uint64_t seed,
                                   const Metrics& m) {
    std::string row = run_id + "," + algorithm + "," + variant + "," + csv_double(lambda) + "," +
                      std::to_string(seed);
    for (double v : {m.cumulative_mean, m.cumulative_std, m.average_mean, m.average_std,
                     m.length_mean, m.length_std})
        row += "," + csv_double(v);
    return row;
}

inline std::string learning_curve_csv(const LearningCurve& curve) {
    std::string out = "episode,return,length\n";
    for (const auto& e : curve)
        out += std::to_string(e.episode) + "," + csv_double(e.total_reward) + "," +
               std::to_string(e.length) + "\n";
    return out;
}

inline std::string causal_trace_csv(const std::vector<CausalTracePoint>& trace) {
    std::string out = "step,w1,reward\n";
    for (const auto& p : trace)
        out += std::to_string(p.step) + "," + csv_double(p.w1) + "," + csv_double(p.reward) + "\n";
    return out;
}

inline std::string pgcr_trace_csv(const std::vector<PgcrTracePoint>& trace) {
    std::string out = "epoch,batch,mse_loss,critic_loss,actor_obj,latent_variance\n";
    for (const auto& p : trace)
        out += std::to_string(p.epoch) + "," + std::to_string(p.batch) + "," +
               csv_double(p.mse_loss) + "," + csv_double(p.critic_loss) + "," +
               csv_double(p.actor_objective) + "," + csv_double(p.latent_variance) + "\n";
    return out;
}

inline std::string sweep_csv(const SweepResult& sweep, const std::string& run_id,
                             const std::string& algorithm) {
    std::string out = std::string(kMetricsCsvHeader) + "\n";
    for (const auto& row : sweep.rows)
        out += metrics_csv_row(run_id, algorithm, "pgcr", row.lambda, row.seed, row.metrics) + "\n";
    return out;
}

}  // namespace pgcr

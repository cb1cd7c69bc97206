#pragma once

#include "pgcr/common.hpp"

#include <vector>

namespace pgcr {

/// Finite MDP with dense transition and reward tables.
template <typename Scalar = double>
struct TabularMdp {
    using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    int state_count = 0;
    int action_count = 0;
    std::vector<MatX> transition;  // per action: S x S, row-stochastic
    MatX reward;                   // S x A
    Scalar gamma = Scalar(0.95);

    void validate() const {
        require(state_count > 0 && action_count > 0, "TabularMdp: empty state or action space");
        require(gamma >= Scalar(0) && gamma < Scalar(1), "TabularMdp: gamma must lie in [0, 1)");
        require(static_cast<int>(transition.size()) == action_count,
                "TabularMdp: one transition matrix per action");
        require(reward.rows() == state_count && reward.cols() == action_count,
                "TabularMdp: reward table must be S x A");
        for (const auto& p : transition) {
            require(p.rows() == state_count && p.cols() == state_count,
                    "TabularMdp: transition matrix must be S x S");
            require((p.array() >= Scalar(0)).all(), "TabularMdp: negative transition probability");
            require((p.rowwise().sum().array() - Scalar(1)).abs().maxCoeff() <= Scalar(1e-12),
                    "TabularMdp: transition rows must sum to 1");
        }
    }
};

/// Q-value iteration to a sup-norm Bellman residual below `tol`.
/// Deterministic given inputs; throws NumericError if the residual has not
/// crossed `tol` after `max_sweeps` sweeps. Residuals per sweep are appended
/// to `residual_trace` when provided.
template <typename Scalar>
typename TabularMdp<Scalar>::MatX value_iteration(const TabularMdp<Scalar>& mdp, Scalar tol,
                                                  long max_sweeps = 1'000'000,
                                                  std::vector<Scalar>* residual_trace = nullptr) {
    mdp.validate();
    require(tol > Scalar(0), "value_iteration: tol must be positive");
    using MatX = typename TabularMdp<Scalar>::MatX;
    using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    MatX q = MatX::Zero(mdp.state_count, mdp.action_count);
    for (long sweep = 0; sweep < max_sweeps; ++sweep) {
        const VecX v = q.rowwise().maxCoeff();
        MatX next(mdp.state_count, mdp.action_count);
        for (int a = 0; a < mdp.action_count; ++a)
            next.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * v);
        const Scalar residual = (next - q).array().abs().maxCoeff();
        if (residual_trace) residual_trace->push_back(residual);
        q = next;
        if (residual < tol) return q;
    }
    throw NumericError("value_iteration: residual did not fall below tol within sweep limit");
}

/// Greedy policy from a Q-table; exact ties break to the lowest action index.
template <typename Derived>
std::vector<int> greedy_policy(const Eigen::MatrixBase<Derived>& q) {
    std::vector<int> policy(q.rows());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = static_cast<int>(a);
        policy[s] = best;
    }
    return policy;
}

}  // namespace pgcr

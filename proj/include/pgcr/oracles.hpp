#pragma once

// Independent reference implementations used to cross-check the production
// code paths: an exhaustive path enumerator for graph separation, a
// min-cost-flow solver for optimal transport, central finite differences
// for network gradients, and instance generators for randomized suites.
// Each oracle deliberately shares no algorithmic machinery with the
// implementation it checks.

#include "pgcr/nn.hpp"
#include "pgcr/scm.hpp"
#include "pgcr/tabular_mdp.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <set>

namespace pgcr::oracle {

// ---------------------------------------------------------------------------
// Path-enumeration separation checkers
// ---------------------------------------------------------------------------

/// All simple undirected paths between a and b, as node sequences.
inline std::vector<std::vector<int>> all_paths(const Dag& dag, int a, int b) {
    std::vector<std::vector<int>> paths;
    std::vector<int> current = {a};
    std::vector<char> used(dag.node_count(), 0);
    used[a] = 1;
    std::function<void(int)> walk = [&](int v) {
        if (v == b) {
            paths.push_back(current);
            return;
        }
        auto visit = [&](int u) {
            if (used[u]) return;
            used[u] = 1;
            current.push_back(u);
            walk(u);
            current.pop_back();
            used[u] = 0;
        };
        for (int u : dag.children(v)) visit(u);
        for (int u : dag.parents(v)) visit(u);
    };
    walk(a);
    return paths;
}

/// Literal transcription of the blocking definition: a path is blocked by z
/// iff some interior node is either a non-collider in z, or a collider with
/// neither itself nor any descendant in z.
inline bool path_blocked(const Dag& dag, const std::vector<int>& path,
                         const std::vector<char>& in_z) {
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const int prev = path[k - 1], node = path[k], next = path[k + 1];
        const bool collider = dag.has_edge(prev, node) && dag.has_edge(next, node);
        if (collider) {
            if (in_z[node]) continue;
            bool observed_descendant = false;
            const auto desc = dag.descendants(node);
            for (int v = 0; v < dag.node_count(); ++v)
                if (desc[v] && in_z[v]) observed_descendant = true;
            if (!observed_descendant) return true;
        } else {
            if (in_z[node]) return true;
        }
    }
    return false;
}

/// d-separation by exhaustive path enumeration.
inline bool d_separated_paths(const Dag& dag, const NodeSet& x, const NodeSet& y,
                              const NodeSet& z) {
    std::vector<char> in_z(dag.node_count(), 0);
    for (int v : z) in_z[v] = 1;
    for (int a : x)
        for (int b : y)
            for (const auto& path : all_paths(dag, a, b))
                if (!path_blocked(dag, path, in_z)) return false;
    return true;
}

/// Back-door criterion checked directly against its two conditions, with
/// back-door paths identified by inspecting the first edge of each
/// enumerated path.
inline bool satisfies_backdoor_paths(const Dag& dag, int x, int y, const NodeSet& z) {
    const auto desc = dag.descendants(x);
    for (int v : z)
        if (desc[v]) return false;
    std::vector<char> in_z(dag.node_count(), 0);
    for (int v : z) in_z[v] = 1;
    for (const auto& path : all_paths(dag, x, y)) {
        const bool into_x = dag.has_edge(path[1], path[0]);
        if (into_x && !path_blocked(dag, path, in_z)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Optimal transport by min-cost flow
// ---------------------------------------------------------------------------

/// Exact W1 between two uniform empirical distributions, solved as a
/// transportation problem by successive shortest augmenting paths. Each
/// sample of `a` supplies |b| unit flows and each sample of `b` demands |a|,
/// so all capacities are integral and the optimum is exact up to the float
/// cost sums.
inline double w1_transport(const std::vector<double>& a, const std::vector<double>& b) {
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    require(n > 0 && m > 0, "w1_transport: empty sample set");
    // node ids: 0 = source, 1..n = a, n+1..n+m = b, n+m+1 = sink
    const int source = 0, sink = n + m + 1, nodes = n + m + 2;
    struct Edge {
        int to;
        long cap;
        double cost;
        int rev;
    };
    std::vector<std::vector<Edge>> adj(nodes);
    auto add_edge = [&](int u, int v, long cap, double cost) {
        adj[u].push_back({v, cap, cost, static_cast<int>(adj[v].size())});
        adj[v].push_back({u, 0, -cost, static_cast<int>(adj[u].size()) - 1});
    };
    for (int i = 0; i < n; ++i) add_edge(source, 1 + i, m, 0.0);
    for (int j = 0; j < m; ++j) add_edge(1 + n + j, sink, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) add_edge(1 + i, 1 + n + j, m, std::abs(a[i] - b[j]));

    long remaining = static_cast<long>(n) * m;
    double total_cost = 0.0;
    while (remaining > 0) {
        // Bellman-Ford shortest path in residual network
        std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
        std::vector<int> prev_node(nodes, -1), prev_edge(nodes, -1);
        dist[source] = 0.0;
        for (int it = 0; it < nodes; ++it) {
            bool changed = false;
            for (int u = 0; u < nodes; ++u) {
                if (!std::isfinite(dist[u])) continue;
                for (int e = 0; e < static_cast<int>(adj[u].size()); ++e) {
                    const Edge& ed = adj[u][e];
                    if (ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - 1e-15) {
                        dist[ed.to] = dist[u] + ed.cost;
                        prev_node[ed.to] = u;
                        prev_edge[ed.to] = e;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        require(std::isfinite(dist[sink]), "w1_transport: no augmenting path");
        long push = remaining;
        for (int v = sink; v != source; v = prev_node[v])
            push = std::min(push, adj[prev_node[v]][prev_edge[v]].cap);
        for (int v = sink; v != source; v = prev_node[v]) {
            Edge& ed = adj[prev_node[v]][prev_edge[v]];
            ed.cap -= push;
            adj[v][ed.rev].cap += push;
            total_cost += static_cast<double>(push) * ed.cost;
        }
        remaining -= push;
    }
    return total_cost / (static_cast<double>(n) * m);
}

// ---------------------------------------------------------------------------
// Finite-difference gradients
// ---------------------------------------------------------------------------

/// Central finite differences of sum(<upstream_col, f(x_col)>) with respect
/// to every parameter and the input, step h.
inline GradientsD fd_gradients(MlpD net, const Mat& x, const Mat& upstream, double h = 1e-5) {
    auto objective = [&](const MlpD& n, const Mat& input) {
        return (forward_batch(n, input).array() * upstream.array()).sum();
    };
    GradientsD g = GradientsD::zeros_like(net, x.cols());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& layer = net.layers[li];
        for (Eigen::Index k = 0; k < layer.w.size(); ++k) {
            const double saved = layer.w.data()[k];
            layer.w.data()[k] = saved + h;
            const double up = objective(net, x);
            layer.w.data()[k] = saved - h;
            const double down = objective(net, x);
            layer.w.data()[k] = saved;
            g.w[li].data()[k] = (up - down) / (2.0 * h);
        }
        for (Eigen::Index k = 0; k < layer.b.size(); ++k) {
            const double saved = layer.b[k];
            layer.b[k] = saved + h;
            const double up = objective(net, x);
            layer.b[k] = saved - h;
            const double down = objective(net, x);
            layer.b[k] = saved;
            g.b[li][k] = (up - down) / (2.0 * h);
        }
    }
    Mat xm = x;
    for (Eigen::Index k = 0; k < xm.size(); ++k) {
        const double saved = xm.data()[k];
        xm.data()[k] = saved + h;
        const double up = objective(net, xm);
        xm.data()[k] = saved - h;
        const double down = objective(net, xm);
        xm.data()[k] = saved;
        g.input.data()[k] = (up - down) / (2.0 * h);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// Random DAG on n nodes: each forward pair (i, j), i < j in a random node
/// relabeling, carries an edge with probability p.
inline Dag random_dag(Rng& rng, int n, double p) {
    std::vector<int> label(n);
    std::iota(label.begin(), label.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(label[i], label[rng.uniform_int(i + 1)]);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < p) edges.emplace_back(label[i], label[j]);
    return Dag(n, std::move(edges));
}

/// Random SCM over a DAG with "mod-shift" mechanisms: every node value takes
/// positive probability under every parent configuration, so conditionals
/// appearing in adjustment formulas are always defined.
inline TabularScm random_scm(Rng& rng, const Dag& dag, int max_domain = 4, int max_noise = 4) {
    const int n = dag.node_count();
    std::vector<std::vector<int>> domains(n);
    std::vector<FiniteDist> noise;
    std::vector<std::vector<int>> tables(n);
    for (int v = 0; v < n; ++v) {
        const int d = 2 + rng.uniform_int(max_domain - 1);
        for (int k = 0; k < d; ++k) domains[v].push_back(k);
        const int u = std::max(d, 2 + rng.uniform_int(std::max(1, max_noise - 1)));
        std::vector<int> support(u);
        std::iota(support.begin(), support.end(), 0);
        Vec probs(u);
        for (int k = 0; k < u; ++k) probs[k] = 0.2 + rng.uniform();
        probs /= probs.sum();
        // exact renormalization so the pmf sums to 1 at double precision
        probs[u - 1] = 1.0 - probs.head(u - 1).sum();
        noise.emplace_back(support, probs);
    }
    for (int v = 0; v < n; ++v) {
        const int d = static_cast<int>(domains[v].size());
        std::vector<int> coeff(dag.parents(v).size());
        for (auto& c : coeff) c = 1 + rng.uniform_int(d);
        tables[v] = mechanism_table(dag, domains, v, noise[v],
                                    [&](const std::vector<int>& pv, int u) {
                                        long acc = u;
                                        for (std::size_t i = 0; i < pv.size(); ++i)
                                            acc += static_cast<long>(coeff[i]) * pv[i];
                                        return static_cast<int>(acc % d);
                                    });
    }
    return TabularScm(dag, std::move(domains), std::move(noise), std::move(tables));
}

/// One ancestral sample of all node values (domain indices), drawn directly
/// from the noise pmfs. Monte-Carlo oracle for marginal().
inline std::vector<int> sample_scm(const TabularScm& scm, Rng& rng) {
    const Dag& g = scm.dag();
    std::vector<int> value_idx(g.node_count());
    std::vector<int> parent_idx;
    for (int v : g.topological_order()) {
        const FiniteDist& nd = scm.noise(v);
        double u = rng.uniform();
        int ni = 0;
        for (Eigen::Index k = 0; k < nd.probs.size(); ++k) {
            u -= nd.probs[k];
            if (u <= 0.0) {
                ni = static_cast<int>(k);
                break;
            }
            ni = static_cast<int>(k);
        }
        parent_idx.clear();
        for (int p : g.parents(v)) parent_idx.push_back(value_idx[p]);
        value_idx[v] = scm.eval(v, parent_idx, ni);
    }
    return value_idx;
}

/// Random MDP with dense row-stochastic transitions and rewards in [0, 1].
inline TabularMdp<double> random_mdp(Rng& rng, int states, int actions, double gamma) {
    TabularMdp<double> mdp;
    mdp.state_count = states;
    mdp.action_count = actions;
    mdp.gamma = gamma;
    mdp.reward.resize(states, actions);
    for (int a = 0; a < actions; ++a) {
        Mat p(states, states);
        for (int s = 0; s < states; ++s) {
            Vec row(states);
            for (int t = 0; t < states; ++t) row[t] = 0.05 + rng.uniform();
            row /= row.sum();
            row[states - 1] = 1.0 - row.head(states - 1).sum();
            p.row(s) = row.transpose();
        }
        mdp.transition.push_back(p);
    }
    for (int s = 0; s < states; ++s)
        for (int a = 0; a < actions; ++a) mdp.reward(s, a) = rng.uniform();
    return mdp;
}

/// Doubles every state of `base` into two copies that share the same
/// reward row and the same image dynamics under phi(s) = s mod n, while the
/// per-copy mass split varies arbitrarily with (state, action). The result
/// satisfies both latent-sufficiency conditions exactly. With
/// `violate_reward_condition`, copy n (the twin of state 0) gets its reward
/// shifted by +0.5 and both twins of state 0 become absorbing, producing a
/// guaranteed optimal-value gap of 0.5 / (1 - gamma).
inline TabularMdp<double> doubled_mdp(const TabularMdp<double>& base, Rng& rng,
                                      bool violate_reward_condition = false) {
    const int n = base.state_count, m = base.action_count;
    TabularMdp<double> out;
    out.state_count = 2 * n;
    out.action_count = m;
    out.gamma = base.gamma;
    out.reward.resize(2 * n, m);
    out.reward.topRows(n) = base.reward;
    out.reward.bottomRows(n) = base.reward;
    for (int a = 0; a < m; ++a) {
        Mat p = Mat::Zero(2 * n, 2 * n);
        for (int s = 0; s < 2 * n; ++s) {
            for (int j = 0; j < n; ++j) {
                const double mass = base.transition[a](s % n, j);
                const double split = rng.uniform();  // may depend on the copy
                p(s, j) = mass * split;
                p(s, j + n) = mass - p(s, j);  // exact complement: image mass is preserved
            }
        }
        out.transition.push_back(p);
    }
    if (violate_reward_condition) {
        for (int a = 0; a < m; ++a) {
            out.reward(n, a) = out.reward(0, a) + 0.5;
            out.transition[a].row(0).setZero();
            out.transition[a](0, 0) = 1.0;
            out.transition[a].row(n).setZero();
            out.transition[a](n, n) = 1.0;
        }
    }
    return out;
}

}  // namespace pgcr::oracle

#pragma once

#include "pgcr/common.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <utility>

namespace pgcr {

// ---------------------------------------------------------------------------
// Graph layer
// ---------------------------------------------------------------------------

using NodeSet = std::vector<int>;

/// Directed acyclic graph over nodes 0..node_count-1. Edges are
/// (parent, child) pairs; construction validates range, self-loops,
/// duplicates and acyclicity.
class Dag {
public:
    Dag(int node_count, std::vector<std::pair<int, int>> edges)
        : node_count_(node_count), edges_(std::move(edges)) {
        require(node_count_ > 0, "Dag: node_count must be positive");
        parents_.resize(node_count_);
        children_.resize(node_count_);
        std::vector<std::pair<int, int>> seen = edges_;
        std::sort(seen.begin(), seen.end());
        require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(),
                "Dag: duplicate edge");
        for (const auto& [a, b] : edges_) {
            require(a >= 0 && a < node_count_ && b >= 0 && b < node_count_,
                    "Dag: edge endpoint out of range");
            require(a != b, "Dag: self-loop");
            parents_[b].push_back(a);
            children_[a].push_back(b);
        }
        for (auto& p : parents_) std::sort(p.begin(), p.end());
        for (auto& c : children_) std::sort(c.begin(), c.end());
        topo_ = compute_topo_order();
    }

    int node_count() const { return node_count_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& parents(int v) const { return parents_.at(v); }
    const std::vector<int>& children(int v) const { return children_.at(v); }
    const std::vector<int>& topological_order() const { return topo_; }

    bool has_edge(int a, int b) const {
        const auto& c = children_.at(a);
        return std::binary_search(c.begin(), c.end(), b);
    }

    /// Mask of strict descendants of v (v itself excluded).
    std::vector<char> descendants(int v) const {
        check_node(v);
        std::vector<char> mask(node_count_, 0);
        std::deque<int> queue(children_[v].begin(), children_[v].end());
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            if (mask[u]) continue;
            mask[u] = 1;
            for (int c : children_[u]) queue.push_back(c);
        }
        return mask;
    }

    /// Mask of ancestors of the given set, including the set itself.
    std::vector<char> ancestors_of(const NodeSet& set) const {
        std::vector<char> mask(node_count_, 0);
        std::deque<int> queue;
        for (int v : set) {
            check_node(v);
            queue.push_back(v);
        }
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            if (mask[u]) continue;
            mask[u] = 1;
            for (int p : parents_[u]) queue.push_back(p);
        }
        return mask;
    }

    /// Copy of the graph with all edges into `v` removed (do-surgery).
    Dag without_incoming(int v) const {
        check_node(v);
        std::vector<std::pair<int, int>> kept;
        for (const auto& e : edges_)
            if (e.second != v) kept.push_back(e);
        return Dag(node_count_, std::move(kept));
    }

    /// Copy of the graph with all edges out of `v` removed.
    Dag without_outgoing(int v) const {
        check_node(v);
        std::vector<std::pair<int, int>> kept;
        for (const auto& e : edges_)
            if (e.first != v) kept.push_back(e);
        return Dag(node_count_, std::move(kept));
    }

    void check_node(int v) const {
        require(v >= 0 && v < node_count_, "Dag: node out of range");
    }

private:
    std::vector<int> compute_topo_order() const {
        std::vector<int> indeg(node_count_, 0);
        for (const auto& e : edges_) ++indeg[e.second];
        std::deque<int> ready;
        for (int v = 0; v < node_count_; ++v)
            if (indeg[v] == 0) ready.push_back(v);
        std::vector<int> order;
        while (!ready.empty()) {
            const int v = ready.front();
            ready.pop_front();
            order.push_back(v);
            for (int c : children_[v])
                if (--indeg[c] == 0) ready.push_back(c);
        }
        require(static_cast<int>(order.size()) == node_count_, "Dag: graph has a cycle");
        return order;
    }

    int node_count_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> parents_, children_;
    std::vector<int> topo_;
};

namespace detail {

inline void check_disjoint_sets(const Dag& dag, const NodeSet& x, const NodeSet& y,
                                const NodeSet& z) {
    std::vector<int> membership(dag.node_count(), 0);
    auto mark = [&](const NodeSet& s) {
        for (int v : s) {
            dag.check_node(v);
            require(++membership[v] == 1, "node sets must be pairwise disjoint");
        }
    };
    mark(x);
    mark(y);
    mark(z);
    require(!x.empty() && !y.empty(), "x and y must be non-empty");
}

}  // namespace detail

/// d-separation of x and y given z, decided by reachability over active
/// trails (the "Bayes ball" scheme): a node is explored in one of two modes,
/// entered-from-child or entered-from-parent, and conditioning plus the
/// collider/descendant rule decide which moves stay active.
inline bool d_separated(const Dag& dag, const NodeSet& x, const NodeSet& y,
                        const NodeSet& z) {
    detail::check_disjoint_sets(dag, x, y, z);
    const int n = dag.node_count();
    std::vector<char> in_z(n, 0);
    for (int v : z) in_z[v] = 1;
    const std::vector<char> anc_z = z.empty() ? std::vector<char>(n, 0) : dag.ancestors_of(z);
    std::vector<char> in_y(n, 0);
    for (int v : y) in_y[v] = 1;

    enum Mode { FromChild = 0, FromParent = 1 };
    std::vector<std::array<char, 2>> visited(n, {0, 0});
    std::deque<std::pair<int, Mode>> queue;
    for (int v : x) queue.emplace_back(v, FromChild);

    while (!queue.empty()) {
        auto [v, mode] = queue.front();
        queue.pop_front();
        if (visited[v][mode]) continue;
        visited[v][mode] = 1;
        if (!in_z[v] && in_y[v]) return false;

        if (mode == FromChild) {
            if (!in_z[v]) {
                for (int p : dag.parents(v)) queue.emplace_back(p, FromChild);
                for (int c : dag.children(v)) queue.emplace_back(c, FromParent);
            }
        } else {
            if (!in_z[v])
                for (int c : dag.children(v)) queue.emplace_back(c, FromParent);
            // collider: continues upward iff v or a descendant of v is observed
            if (anc_z[v])
                for (int p : dag.parents(v)) queue.emplace_back(p, FromChild);
        }
    }
    return true;
}

/// Back-door criterion for the ordered pair (x, y): no member of z is a
/// descendant of x, and z blocks every path into x. The blocking condition
/// is decided as d-separation in the graph with x's outgoing edges removed,
/// which leaves exactly the paths that enter x through the back door.
inline bool satisfies_backdoor(const Dag& dag, int x, int y, const NodeSet& z) {
    dag.check_node(x);
    dag.check_node(y);
    require(x != y, "satisfies_backdoor: x and y must differ");
    for (int v : z) {
        dag.check_node(v);
        require(v != x && v != y, "satisfies_backdoor: z must exclude x and y");
    }
    const auto desc = dag.descendants(x);
    for (int v : z)
        if (desc[v]) return false;
    return d_separated(dag.without_outgoing(x), {x}, {y}, z);
}

// ---------------------------------------------------------------------------
// Structural causal model
// ---------------------------------------------------------------------------

/// Finite probability mass function over distinct integer values.
struct FiniteDist {
    std::vector<int> support;
    Vec probs;

    FiniteDist(std::vector<int> support_, Vec probs_)
        : support(std::move(support_)), probs(std::move(probs_)) {
        require(support.size() == static_cast<std::size_t>(probs.size()),
                "FiniteDist: support/probs size mismatch");
        require(!support.empty(), "FiniteDist: empty support");
        std::vector<int> sorted = support;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                "FiniteDist: support values must be distinct");
        require((probs.array() >= 0.0).all(), "FiniteDist: negative probability");
        require(std::abs(probs.sum() - 1.0) <= 1e-12, "FiniteDist: probabilities must sum to 1");
    }

    static FiniteDist point_mass(int value) { return FiniteDist({value}, Vec::Ones(1)); }

    double prob_of(int value) const {
        for (std::size_t i = 0; i < support.size(); ++i)
            if (support[i] == value) return probs[static_cast<Eigen::Index>(i)];
        return 0.0;
    }
};

/// Finite-variable SCM: per node a finite domain, an exogenous noise pmf and
/// a deterministic mechanism. The mechanism is a dense lookup table over
/// (parent-value combination, noise value), parents ordered by node id, with
/// the noise index fastest-varying; each entry is an index into the node's
/// domain. Inference is exact enumeration over joint noise configurations.
class TabularScm {
public:
    static constexpr double kEnumerationCap = 1e7;

    TabularScm(Dag dag, std::vector<std::vector<int>> domains,
               std::vector<FiniteDist> noise_dists, std::vector<std::vector<int>> tables)
        : dag_(std::move(dag)),
          domains_(std::move(domains)),
          noise_(std::move(noise_dists)),
          tables_(std::move(tables)) {
        const int n = dag_.node_count();
        require(static_cast<int>(domains_.size()) == n, "TabularScm: one domain per node");
        require(static_cast<int>(noise_.size()) == n, "TabularScm: one noise pmf per node");
        require(static_cast<int>(tables_.size()) == n, "TabularScm: one mechanism per node");
        for (int v = 0; v < n; ++v) {
            require(!domains_[v].empty(), "TabularScm: empty domain");
            std::vector<int> sorted = domains_[v];
            std::sort(sorted.begin(), sorted.end());
            require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                    "TabularScm: domain values must be distinct");
            std::size_t combos = noise_[v].support.size();
            for (int p : dag_.parents(v)) combos *= domains_[p].size();
            require(tables_[v].size() == combos,
                    "TabularScm: mechanism table must cover every (parents, noise) pair");
            for (int idx : tables_[v])
                require(idx >= 0 && idx < static_cast<int>(domains_[v].size()),
                        "TabularScm: mechanism output outside domain");
        }
    }

    const Dag& dag() const { return dag_; }
    const std::vector<int>& domain(int v) const { return domains_.at(v); }
    const FiniteDist& noise(int v) const { return noise_.at(v); }
    const std::vector<int>& table(int v) const { return tables_.at(v); }

    int domain_index(int v, int value) const {
        const auto& d = domains_.at(v);
        const auto it = std::find(d.begin(), d.end(), value);
        require(it != d.end(), "TabularScm: value not in domain");
        return static_cast<int>(it - d.begin());
    }

    /// Mechanism evaluation on domain indices. `parent_idx` must follow the
    /// node's parents in increasing node-id order.
    int eval(int v, const std::vector<int>& parent_idx, int noise_idx) const {
        const auto& parents = dag_.parents(v);
        require(parent_idx.size() == parents.size(), "TabularScm::eval: parent arity mismatch");
        std::size_t flat = 0;
        for (std::size_t i = 0; i < parents.size(); ++i)
            flat = flat * domains_[parents[i]].size() + static_cast<std::size_t>(parent_idx[i]);
        flat = flat * noise_[v].support.size() + static_cast<std::size_t>(noise_idx);
        return tables_[v].at(flat);
    }

    /// Number of joint noise configurations enumerated by exact inference.
    double configuration_count() const {
        double total = 1.0;
        for (const auto& d : noise_) total *= static_cast<double>(d.support.size());
        return total;
    }

    /// Visits every joint noise configuration: f(value_indices, probability).
    /// Throws std::length_error past the enumeration cap.
    template <typename F>
    void enumerate(F&& f) const {
        if (configuration_count() > kEnumerationCap)
            throw std::length_error("TabularScm: enumeration exceeds 1e7 configurations");
        const int n = dag_.node_count();
        std::vector<int> noise_idx(n, 0);
        std::vector<int> value_idx(n, 0);
        std::vector<int> scratch;
        while (true) {
            double p = 1.0;
            for (int v = 0; v < n; ++v) p *= noise_[v].probs[noise_idx[v]];
            if (p > 0.0) {
                for (int v : dag_.topological_order()) {
                    scratch.clear();
                    for (int par : dag_.parents(v)) scratch.push_back(value_idx[par]);
                    value_idx[v] = eval(v, scratch, noise_idx[v]);
                }
                f(const_cast<const std::vector<int>&>(value_idx), p);
            }
            int v = n - 1;
            while (v >= 0 && ++noise_idx[v] == static_cast<int>(noise_[v].support.size())) {
                noise_idx[v] = 0;
                --v;
            }
            if (v < 0) break;
        }
    }

private:
    Dag dag_;
    std::vector<std::vector<int>> domains_;
    std::vector<FiniteDist> noise_;
    std::vector<std::vector<int>> tables_;
};

/// Builds a dense mechanism table from a function of raw parent values and
/// the raw noise value. Convenience for constructing models in code.
template <typename F>
std::vector<int> mechanism_table(const Dag& dag, const std::vector<std::vector<int>>& domains,
                                 int node, const FiniteDist& noise, F&& fn) {
    const auto& parents = dag.parents(node);
    std::size_t combos = 1;
    for (int p : parents) combos *= domains[p].size();
    std::vector<int> table;
    table.reserve(combos * noise.support.size());
    std::vector<int> pv(parents.size());
    for (std::size_t c = 0; c < combos; ++c) {
        std::size_t rest = c;
        for (std::size_t i = parents.size(); i-- > 0;) {
            pv[i] = domains[parents[i]][rest % domains[parents[i]].size()];
            rest /= domains[parents[i]].size();
        }
        for (int u : noise.support) {
            const int value = fn(pv, u);
            const auto& dom = domains[node];
            const auto it = std::find(dom.begin(), dom.end(), value);
            require(it != dom.end(), "mechanism_table: function output outside domain");
            table.push_back(static_cast<int>(it - dom.begin()));
        }
    }
    return table;
}

/// Atomic intervention do(var := value): mechanism replaced by the constant,
/// incoming edges removed, noise collapsed to a point mass. The input model
/// is left untouched.
inline TabularScm intervene(const TabularScm& scm, int var, int value) {
    const Dag& g = scm.dag();
    g.check_node(var);
    const int idx = scm.domain_index(var, value);  // throws if value not in domain

    std::vector<std::vector<int>> domains;
    std::vector<FiniteDist> noise;
    std::vector<std::vector<int>> tables;
    const Dag cut = g.without_incoming(var);
    for (int v = 0; v < g.node_count(); ++v) {
        domains.push_back(scm.domain(v));
        if (v == var) {
            noise.push_back(FiniteDist::point_mass(0));
            tables.push_back({idx});
        } else {
            noise.push_back(scm.noise(v));
            tables.push_back(scm.table(v));  // parent sets unchanged for v != var
        }
    }
    return TabularScm(cut, std::move(domains), std::move(noise), std::move(tables));
}

/// Exact observational marginal P(var) by enumeration.
inline FiniteDist marginal(const TabularScm& scm, int var) {
    scm.dag().check_node(var);
    Vec probs = Vec::Zero(static_cast<Eigen::Index>(scm.domain(var).size()));
    scm.enumerate([&](const std::vector<int>& value_idx, double p) { probs[value_idx[var]] += p; });
    return FiniteDist(scm.domain(var), probs / probs.sum());
}

/// Back-door adjustment: sum_z P(y | x, z) P(z) computed from the
/// observational model alone. Requires satisfies_backdoor(x, y, z); refuses
/// to adjust otherwise. Throws std::domain_error when some z-cell with
/// positive mass gives P(x, z) = 0, where the conditional is undefined.
inline FiniteDist backdoor_adjusted(const TabularScm& scm, int x, int x_val, int y,
                                    const NodeSet& z) {
    require(satisfies_backdoor(scm.dag(), x, y, z),
            "backdoor_adjusted: (x, y, z) does not satisfy the back-door criterion");
    const int x_idx = scm.domain_index(x, x_val);
    const auto& y_dom = scm.domain(y);

    std::size_t z_cells = 1;
    for (int v : z) z_cells *= scm.domain(v).size();
    std::vector<double> p_z(z_cells, 0.0);
    std::vector<double> p_xz(z_cells, 0.0);
    Mat p_yxz = Mat::Zero(static_cast<Eigen::Index>(z_cells), static_cast<Eigen::Index>(y_dom.size()));

    auto z_flat = [&](const std::vector<int>& value_idx) {
        std::size_t flat = 0;
        for (int v : z) flat = flat * scm.domain(v).size() + static_cast<std::size_t>(value_idx[v]);
        return flat;
    };
    scm.enumerate([&](const std::vector<int>& value_idx, double p) {
        const std::size_t cell = z_flat(value_idx);
        p_z[cell] += p;
        if (value_idx[x] == x_idx) {
            p_xz[cell] += p;
            p_yxz(static_cast<Eigen::Index>(cell), value_idx[y]) += p;
        }
    });

    Vec probs = Vec::Zero(static_cast<Eigen::Index>(y_dom.size()));
    for (std::size_t cell = 0; cell < z_cells; ++cell) {
        if (p_z[cell] <= 0.0) continue;
        if (p_xz[cell] <= 0.0)
            throw std::domain_error(
                "backdoor_adjusted: P(x, z) = 0 on a positive-mass z cell; adjustment undefined");
        probs += (p_z[cell] / p_xz[cell]) * p_yxz.row(static_cast<Eigen::Index>(cell)).transpose();
    }
    return FiniteDist(y_dom, probs / probs.sum());
}

// ---------------------------------------------------------------------------
// One-step MDP encodings
// ---------------------------------------------------------------------------

/// Node roles when a 4-node SCM encodes the one-step MDP
///   s' = f_P(s, a, eps),  a = pi(s, eta),  r = f_R(s, a).
struct MdpScmRoles {
    int state = 0;
    int action = 1;
    int reward = 2;
    int next_state = 3;
};

namespace detail {

inline void check_mdp_shape(const TabularScm& scm, const MdpScmRoles& r) {
    const Dag& g = scm.dag();
    require(g.node_count() == 4, "MDP-encoding SCM must have exactly 4 nodes");
    const std::vector<int> roles = {r.state, r.action, r.reward, r.next_state};
    std::vector<int> sorted = roles;
    std::sort(sorted.begin(), sorted.end());
    require(sorted == std::vector<int>({0, 1, 2, 3}), "MdpScmRoles must cover all 4 nodes");
    std::vector<std::pair<int, int>> expected = {{r.state, r.action},
                                                 {r.state, r.next_state},
                                                 {r.action, r.next_state},
                                                 {r.state, r.reward},
                                                 {r.action, r.reward}};
    std::sort(expected.begin(), expected.end());
    std::vector<std::pair<int, int>> actual = g.edges();
    std::sort(actual.begin(), actual.end());
    require(actual == expected, "SCM does not encode the one-step MDP graph");
}

}  // namespace detail

/// Interventional next-state distribution P^{do(a := a_val)}(s'): the
/// expectation over the observational state marginal and the transition
/// noise of the transition mechanism evaluated at the forced action. This is
/// the adjustment-formula route; it never mutates the model.
inline FiniteDist interventional_next_state(const TabularScm& scm, const MdpScmRoles& roles,
                                            int a_val) {
    detail::check_mdp_shape(scm, roles);
    const int a_idx = scm.domain_index(roles.action, a_val);
    const FiniteDist p_s = marginal(scm, roles.state);
    const FiniteDist& eps = scm.noise(roles.next_state);

    // transition parents are (state, action) in node-id order
    const auto& parents = scm.dag().parents(roles.next_state);
    auto parent_idx = [&](int s_idx) {
        std::vector<int> idx(2);
        idx[parents[0] == roles.state ? 0 : 1] = s_idx;
        idx[parents[0] == roles.action ? 0 : 1] = a_idx;
        return idx;
    };

    Vec probs = Vec::Zero(static_cast<Eigen::Index>(scm.domain(roles.next_state).size()));
    for (std::size_t si = 0; si < p_s.support.size(); ++si) {
        const double ps = p_s.probs[static_cast<Eigen::Index>(si)];
        if (ps == 0.0) continue;
        for (std::size_t ei = 0; ei < eps.support.size(); ++ei) {
            const double pe = eps.probs[static_cast<Eigen::Index>(ei)];
            if (pe == 0.0) continue;
            const int out = scm.eval(roles.next_state, parent_idx(static_cast<int>(si)),
                                     static_cast<int>(ei));
            probs[out] += ps * pe;
        }
    }
    return FiniteDist(scm.domain(roles.next_state), probs / probs.sum());
}

/// Interventional reward distribution P^{do(s := s_val)}(r): the policy
/// mechanism responds to the forced state through its own noise, and the
/// reward mechanism is evaluated at (s_val, a). Exact, via the structural
/// equations of the action and reward nodes only.
inline FiniteDist interventional_reward(const TabularScm& scm, const MdpScmRoles& roles,
                                        int s_val) {
    detail::check_mdp_shape(scm, roles);
    const int s_idx = scm.domain_index(roles.state, s_val);
    const FiniteDist& eta = scm.noise(roles.action);
    const FiniteDist& u_r = scm.noise(roles.reward);

    const auto& r_parents = scm.dag().parents(roles.reward);
    auto reward_parent_idx = [&](int a_idx) {
        std::vector<int> idx(2);
        idx[r_parents[0] == roles.state ? 0 : 1] = s_idx;
        idx[r_parents[0] == roles.action ? 0 : 1] = a_idx;
        return idx;
    };

    Vec probs = Vec::Zero(static_cast<Eigen::Index>(scm.domain(roles.reward).size()));
    for (std::size_t hi = 0; hi < eta.support.size(); ++hi) {
        const double ph = eta.probs[static_cast<Eigen::Index>(hi)];
        if (ph == 0.0) continue;
        const int a_idx = scm.eval(roles.action, {s_idx}, static_cast<int>(hi));
        for (std::size_t ui = 0; ui < u_r.support.size(); ++ui) {
            const double pu = u_r.probs[static_cast<Eigen::Index>(ui)];
            if (pu == 0.0) continue;
            const int out = scm.eval(roles.reward, reward_parent_idx(a_idx), static_cast<int>(ui));
            probs[out] += ph * pu;
        }
    }
    return FiniteDist(scm.domain(roles.reward), probs / probs.sum());
}

}  // namespace pgcr

#pragma once

// Test-only helpers. The brute-force enumerator and the loopy BP here are
// deliberately independent of the library's inference paths so they can serve
// as oracles.

#include <cmath>
#include <map>
#include <vector>

#include "srg/factor_graph.hpp"
#include "srg/rng.hpp"

namespace testsupport {

using namespace srg;

struct BruteResult {
    std::vector<std::vector<double>> marginals;
    double log_z = 0.0;
};

/// Plain nested-loop enumeration in linear domain over the raw tables.
inline BruteResult brute_force(const FactorGraph& fg) {
    const int n = fg.n_vars();
    Index total = 1;
    for (int v = 0; v < n; ++v) total *= fg.cardinality(v);
    BruteResult out;
    out.marginals.assign(static_cast<std::size_t>(n), {});
    for (int v = 0; v < n; ++v)
        out.marginals[static_cast<std::size_t>(v)].assign(
            static_cast<std::size_t>(fg.cardinality(v)), 0.0);
    double z = 0.0;
    std::vector<int> st(static_cast<std::size_t>(n), 0);
    for (Index idx = 0; idx < total; ++idx) {
        Index rest = idx;
        for (int v = n - 1; v >= 0; --v) {
            st[static_cast<std::size_t>(v)] = static_cast<int>(rest % fg.cardinality(v));
            rest /= fg.cardinality(v);
        }
        double w = 1.0;
        for (const auto& f : fg.factors()) {
            std::vector<int> sub;
            for (VarId v : f.scope) sub.push_back(st[static_cast<std::size_t>(v)]);
            w *= f.table[f.table.index_of(sub)];
        }
        z += w;
        for (int v = 0; v < n; ++v)
            out.marginals[static_cast<std::size_t>(v)][static_cast<std::size_t>(
                st[static_cast<std::size_t>(v)])] += w;
    }
    for (auto& m : out.marginals)
        for (auto& p : m) p /= z;
    out.log_z = std::log(z);
    return out;
}

/// Textbook sum-product loopy BP on the factor graph (damped, linear domain).
struct LoopyBpResult {
    std::vector<std::vector<double>> marginals;
    bool converged = false;
    int iterations = 0;
};

inline LoopyBpResult loopy_bp(const FactorGraph& fg, double damping = 0.3, int max_iters = 5000,
                              double tol = 1e-12) {
    struct Key {
        int factor, var;
        bool operator<(const Key& o) const { return std::tie(factor, var) < std::tie(o.factor, o.var); }
    };
    std::map<Key, std::vector<double>> f2v, v2f;
    for (int a = 0; a < fg.n_factors(); ++a)
        for (VarId v : fg.factor(a).scope) {
            std::vector<double> u(static_cast<std::size_t>(fg.cardinality(v)),
                                  1.0 / fg.cardinality(v));
            f2v[{a, v}] = u;
            v2f[{a, v}] = u;
        }
    auto normalize = [](std::vector<double>& m) {
        double s = 0.0;
        for (double x : m) s += x;
        for (double& x : m) x /= s;
    };
    LoopyBpResult out;
    for (int it = 1; it <= max_iters; ++it) {
        double delta = 0.0;
        // variable -> factor
        for (auto& [key, msg] : v2f) {
            std::vector<double> nm(msg.size(), 1.0);
            for (int b = 0; b < fg.n_factors(); ++b) {
                if (b == key.factor) continue;
                const auto& sc = fg.factor(b).scope;
                if (std::find(sc.begin(), sc.end(), key.var) == sc.end()) continue;
                const auto& in = f2v[{b, key.var}];
                for (std::size_t s = 0; s < nm.size(); ++s) nm[s] *= in[s];
            }
            normalize(nm);
            for (std::size_t s = 0; s < nm.size(); ++s) {
                delta = std::max(delta, std::abs(nm[s] - msg[s]));
                msg[s] = damping * msg[s] + (1 - damping) * nm[s];
            }
        }
        // factor -> variable
        for (auto& [key, msg] : f2v) {
            const Factor& f = fg.factor(key.factor);
            std::vector<double> nm(msg.size(), 0.0);
            std::vector<int> st(f.scope.size(), 0);
            for (Index idx = 0; idx < f.table.size(); ++idx) {
                f.table.state_of(idx, st);
                double w = f.table[idx];
                int target_state = 0;
                for (std::size_t p = 0; p < f.scope.size(); ++p) {
                    if (f.scope[p] == key.var) {
                        target_state = st[p];
                        continue;
                    }
                    w *= v2f[{key.factor, f.scope[p]}][static_cast<std::size_t>(st[p])];
                }
                nm[static_cast<std::size_t>(target_state)] += w;
            }
            normalize(nm);
            for (std::size_t s = 0; s < nm.size(); ++s) {
                delta = std::max(delta, std::abs(nm[s] - msg[s]));
                msg[s] = damping * msg[s] + (1 - damping) * nm[s];
            }
        }
        out.iterations = it;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    out.marginals.assign(static_cast<std::size_t>(fg.n_vars()), {});
    for (int v = 0; v < fg.n_vars(); ++v) {
        std::vector<double> m(static_cast<std::size_t>(fg.cardinality(v)), 1.0);
        for (int a = 0; a < fg.n_factors(); ++a) {
            const auto& sc = fg.factor(a).scope;
            if (std::find(sc.begin(), sc.end(), v) == sc.end()) continue;
            const auto& in = f2v[{a, v}];
            for (std::size_t s = 0; s < m.size(); ++s) m[s] *= in[s];
        }
        normalize(m);
        out.marginals[static_cast<std::size_t>(v)] = m;
    }
    return out;
}

/// Random spanning-tree spin model on n binary nodes.
inline FactorGraph random_tree_model(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v)
        edges.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(v))), v});
    std::vector<double> w, b;
    for (std::size_t e = 0; e < edges.size(); ++e) w.push_back(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < n; ++i) b.push_back(rng.uniform(-0.7, 0.7));
    return spin_model(n, edges, w, b);
}

/// Complete pairwise model with every factor identically 1.
inline FactorGraph uniform_complete_model(int n) {
    std::vector<std::pair<int, int>> edges;
    std::vector<double> w;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            edges.push_back({i, j});
            w.push_back(0.0);
        }
    return spin_model(n, edges, w, {});
}

} // namespace testsupport

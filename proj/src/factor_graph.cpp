#include "srg/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "srg/rng.hpp"

namespace srg {

namespace {

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        p[a] = b;
        return true;
    }
};

bool connected(int n_vars, const std::vector<Factor>& factors) {
    if (n_vars <= 1) return true;
    UnionFind uf(n_vars);
    int comps = n_vars;
    for (const auto& f : factors)
        for (std::size_t i = 1; i < f.scope.size(); ++i)
            if (uf.unite(f.scope[0], f.scope[i])) --comps;
    return comps == 1;
}

} // namespace

FactorGraph FactorGraph::make(std::vector<VariableDecl> vars, std::vector<Factor> factors) {
    std::set<std::string> names;
    for (const auto& v : vars) {
        if (v.cardinality < 1) fail("InvalidModel", "cardinality must be >= 1");
        if (!names.insert(v.name).second) fail("InvalidModel", "duplicate variable id " + v.name);
    }
    const int n = static_cast<int>(vars.size());
    std::set<std::string> fnames;
    for (const auto& f : factors) {
        if (!fnames.insert(f.name).second) fail("InvalidModel", "duplicate factor id " + f.name);
        if (f.scope.empty()) fail("InvalidModel", "factor " + f.name + " has empty scope");
        if (!std::is_sorted(f.scope.begin(), f.scope.end()) ||
            std::adjacent_find(f.scope.begin(), f.scope.end()) != f.scope.end())
            fail("InvalidModel", "factor " + f.name + " scope must be strictly increasing");
        Index expect = 1;
        for (std::size_t p = 0; p < f.scope.size(); ++p) {
            VarId v = f.scope[p];
            if (v < 0 || v >= n) fail("InvalidModel", "factor " + f.name + " references unknown variable");
            if (f.table.scope()[p] != v) fail("InvalidModel", "factor " + f.name + " table scope mismatch");
            if (f.table.cards()[p] != vars[static_cast<std::size_t>(v)].cardinality)
                fail("InvalidModel", "factor " + f.name + " table cardinality mismatch");
            expect *= vars[static_cast<std::size_t>(v)].cardinality;
        }
        if (f.table.size() != expect) fail("InvalidModel", "factor " + f.name + " table size mismatch");
        if ((f.table.values() < 0.0).any()) fail("InvalidModel", "factor " + f.name + " has negative entries");
        if (!(f.table.values() > 0.0).any()) fail("InvalidModel", "factor " + f.name + " is identically zero");
    }
    if (!connected(n, factors)) fail("InvalidModel", "variable-factor graph is not connected");
    FactorGraph fg;
    fg.vars_ = std::move(vars);
    fg.factors_ = std::move(factors);
    return fg;
}

int FactorGraph::var_index(const std::string& name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].name == name) return static_cast<int>(i);
    return -1;
}

int FactorGraph::factor_index(const std::string& name) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
        if (factors_[i].name == name) return static_cast<int>(i);
    return -1;
}

bool FactorGraph::is_pairwise() const {
    for (const auto& f : factors_)
        if (f.scope.size() > 2) return false;
    return true;
}

std::vector<std::pair<VarId, VarId>> FactorGraph::pairwise_edges() const {
    std::set<std::pair<VarId, VarId>> s;
    for (const auto& f : factors_)
        if (f.scope.size() == 2) s.insert({f.scope[0], f.scope[1]});
    return {s.begin(), s.end()};
}

std::vector<int> FactorGraph::cards_of(const std::vector<VarId>& scope) const {
    std::vector<int> c;
    c.reserve(scope.size());
    for (VarId v : scope) c.push_back(cardinality(v));
    return c;
}

ExactResult exact_inference(const FactorGraph& fg, Index state_limit) {
    const int n = fg.n_vars();
    Index total = 1;
    for (int v = 0; v < n; ++v) {
        if (total > state_limit / fg.cardinality(v) + 1) fail("StateSpaceTooLarge", "joint space exceeds state limit");
        total *= fg.cardinality(v);
        if (total > state_limit) fail("StateSpaceTooLarge", "joint space exceeds state limit");
    }

    // Per-factor log tables; -inf marks true zeros so Z is exact.
    std::vector<Table> logf;
    logf.reserve(fg.factors().size());
    for (const auto& f : fg.factors()) {
        Table lt(f.scope, f.table.cards());
        for (Index i = 0; i < lt.size(); ++i)
            lt[i] = f.table[i] > 0.0 ? std::log(f.table[i]) : -std::numeric_limits<double>::infinity();
        logf.push_back(std::move(lt));
    }
    std::vector<std::vector<Index>> strides(logf.size());
    for (std::size_t a = 0; a < logf.size(); ++a) {
        const auto& sc = fg.factor(static_cast<FactorId>(a)).scope;
        strides[a].resize(sc.size());
        Index s = 1;
        for (std::size_t p = sc.size(); p-- > 0;) {
            strides[a][p] = s;
            s *= fg.cardinality(sc[p]);
        }
    }

    std::vector<int> digit(static_cast<std::size_t>(n), 0);
    auto for_each_state = [&](auto&& body) {
        std::fill(digit.begin(), digit.end(), 0);
        for (Index idx = 0;; ++idx) {
            double lw = 0.0;
            for (std::size_t a = 0; a < logf.size(); ++a) {
                const auto& sc = fg.factor(static_cast<FactorId>(a)).scope;
                Index fi = 0;
                for (std::size_t p = 0; p < sc.size(); ++p)
                    fi += strides[a][p] * digit[static_cast<std::size_t>(sc[p])];
                lw += logf[a][fi];
            }
            body(lw, digit);
            if (idx + 1 == total) break;
            for (int p = n; p-- > 0;) {
                if (++digit[static_cast<std::size_t>(p)] < fg.cardinality(p)) break;
                digit[static_cast<std::size_t>(p)] = 0;
            }
        }
    };

    double max_lw = -std::numeric_limits<double>::infinity();
    for_each_state([&](double lw, const std::vector<int>&) {
        if (lw > max_lw) max_lw = lw;
    });
    if (max_lw == -std::numeric_limits<double>::infinity())
        fail("ZeroPartition", "all joint weights are zero");

    ExactResult res;
    res.marginals.assign(static_cast<std::size_t>(n), Eigen::ArrayXd());
    for (int v = 0; v < n; ++v) res.marginals[static_cast<std::size_t>(v)] = Eigen::ArrayXd::Zero(fg.cardinality(v));
    double z_scaled = 0.0;
    for_each_state([&](double lw, const std::vector<int>& st) {
        if (lw == -std::numeric_limits<double>::infinity()) return;
        double w = std::exp(lw - max_lw);
        z_scaled += w;
        for (int v = 0; v < n; ++v) res.marginals[static_cast<std::size_t>(v)][st[static_cast<std::size_t>(v)]] += w;
    });
    res.log_partition = max_lw + std::log(z_scaled);
    for (int v = 0; v < n; ++v) res.marginals[static_cast<std::size_t>(v)] /= z_scaled;
    return res;
}

FactorGraph spin_model(int n, const std::vector<std::pair<int, int>>& edges,
                       const std::vector<double>& weights, const std::vector<double>& biases) {
    if (static_cast<std::size_t>(edges.size()) != weights.size())
        fail("InvalidModel", "edge/weight count mismatch");
    std::vector<VariableDecl> vars;
    vars.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) vars.push_back({"x" + std::to_string(i + 1), 2});
    std::vector<Factor> factors;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [i, j] = edges[e];
        if (i > j) std::swap(i, j);
        double w = weights[e];
        Table t({static_cast<VarId>(i), static_cast<VarId>(j)}, {2, 2});
        t[0] = std::exp(w);  // s_i = s_j = -1
        t[1] = std::exp(-w);
        t[2] = std::exp(-w);
        t[3] = std::exp(w);
        factors.push_back({"w" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                           {static_cast<VarId>(i), static_cast<VarId>(j)},
                           std::move(t)});
    }
    for (std::size_t i = 0; i < biases.size(); ++i) {
        Table t({static_cast<VarId>(i)}, {2});
        t[0] = std::exp(-biases[i]);
        t[1] = std::exp(biases[i]);
        factors.push_back({"b" + std::to_string(i + 1), {static_cast<VarId>(i)}, std::move(t)});
    }
    return FactorGraph::make(std::move(vars), std::move(factors));
}

namespace {

// Draws (weights, biases) for a fixed edge list under the requested style.
void draw_potentials(Rng& rng, PotentialStyle style, const GeneratorOptions& opt, int n,
                     std::size_t n_edges, std::vector<double>& weights, std::vector<double>& biases) {
    weights.clear();
    biases.clear();
    switch (style) {
        case PotentialStyle::uniform_small:
            for (std::size_t e = 0; e < n_edges; ++e) weights.push_back(rng.uniform(0.0, 0.1));
            for (int i = 0; i < n; ++i) biases.push_back(rng.uniform(0.0, 0.3));
            break;
        case PotentialStyle::gaussian: {
            double sd = 1.0 / std::sqrt(static_cast<double>(n - 1));
            for (std::size_t e = 0; e < n_edges; ++e) weights.push_back(rng.normal() * sd);
            for (int i = 0; i < n; ++i) biases.push_back(rng.normal());
            break;
        }
        case PotentialStyle::minka_qi:
            // Stand-in for the cited generator: N(0,1) weights and biases at a
            // caller-supplied strength.
            for (std::size_t e = 0; e < n_edges; ++e)
                weights.push_back(rng.normal() * opt.minka_qi_strength);
            for (int i = 0; i < n; ++i) biases.push_back(rng.normal() * opt.minka_qi_strength);
            break;
    }
}

} // namespace

FactorGraph random_complete_model(int n, std::uint64_t seed, PotentialStyle style,
                                  const GeneratorOptions& opt) {
    if (n < 2) fail("InvalidSize", "need at least 2 variables");
    Rng rng(seed);
    std::vector<std::pair<int, int>> edges;
    if (style == PotentialStyle::gaussian) {
        // Each edge present independently; resample until connected.
        for (int attempt = 0; attempt < 10000; ++attempt) {
            edges.clear();
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (rng.uniform() < opt.edge_prob) edges.push_back({i, j});
            UnionFind uf(n);
            int comps = n;
            for (auto [i, j] : edges)
                if (uf.unite(i, j)) --comps;
            if (comps == 1) break;
            edges.clear();
        }
        if (edges.empty()) fail("InvalidModel", "failed to sample a connected graph");
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
    }
    std::vector<double> weights, biases;
    draw_potentials(rng, style, opt, n, edges.size(), weights, biases);
    return spin_model(n, edges, weights, biases);
}

FactorGraph random_bipartite_model(int n_left, int n_right, std::uint64_t seed,
                                   PotentialStyle style, const GeneratorOptions& opt) {
    if (n_left < 1 || n_right < 1) fail("InvalidSize", "both sides must be nonempty");
    int n = n_left + n_right;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n_left; ++i)
        for (int j = 0; j < n_right; ++j) edges.push_back({i, n_left + j});
    Rng rng(seed);
    std::vector<double> weights, biases;
    draw_potentials(rng, style, opt, n, edges.size(), weights, biases);
    return spin_model(n, edges, weights, biases);
}

FactorGraph grid_model(int rows, int cols, std::uint64_t seed, PotentialStyle style,
                       const GeneratorOptions& opt) {
    if (rows < 1 || cols < 1) fail("InvalidSize", "grid dimensions must be positive");
    int n = rows * cols;
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int v = r * cols + c;
            if (c + 1 < cols) edges.push_back({v, v + 1});
            if (r + 1 < rows) edges.push_back({v, v + cols});
        }
    std::sort(edges.begin(), edges.end());
    Rng rng(seed);
    std::vector<double> weights, biases;
    draw_potentials(rng, style, opt, n, edges.size(), weights, biases);
    if (!opt.grid_biases) biases.clear(); // edge factors only by default
    return spin_model(n, edges, weights, biases);
}

} // namespace srg

#include "srg/region_graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>

namespace srg {

bool clique_contains(const Clique& outer, const Clique& inner) {
    return std::includes(outer.vars.begin(), outer.vars.end(), inner.vars.begin(),
                         inner.vars.end());
}

Clique make_clique(std::vector<VarId> vars) {
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    if (vars.empty()) fail("InvalidRegionGraph", "clique must be nonempty");
    return Clique{std::move(vars)};
}

namespace {

std::vector<VarId> sorted_unique(std::vector<VarId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

RegionId RegionGraph::add_region(std::vector<VarId> vars, std::vector<Clique> cliques,
                                 std::vector<FactorId> factors) {
    Region r;
    r.id = next_id_++;
    r.vars = sorted_unique(std::move(vars));
    for (auto& c : cliques) c = make_clique(std::move(c.vars));
    std::sort(cliques.begin(), cliques.end());
    cliques.erase(std::unique(cliques.begin(), cliques.end()), cliques.end());
    r.cliques = std::move(cliques);
    std::sort(factors.begin(), factors.end());
    factors.erase(std::unique(factors.begin(), factors.end()), factors.end());
    r.factors = std::move(factors);
    RegionId id = r.id;
    regions_.emplace(id, std::move(r));
    return id;
}

void RegionGraph::add_edge(RegionId parent, RegionId child) {
    if (!has_region(parent) || !has_region(child))
        fail("InvalidRegionGraph", "edge endpoint does not exist");
    if (parent == child) fail("InvalidRegionGraph", "self edge");
    edges_.insert({parent, child});
    redges_.insert({child, parent});
}

void RegionGraph::remove_edge(RegionId parent, RegionId child) {
    edges_.erase({parent, child});
    redges_.erase({child, parent});
}

void RegionGraph::remove_region(RegionId id) {
    for (RegionId p : parents(id)) remove_edge(p, id);
    for (RegionId c : children(id)) remove_edge(id, c);
    regions_.erase(id);
}

const Region& RegionGraph::region(RegionId id) const {
    auto it = regions_.find(id);
    if (it == regions_.end()) fail("InvalidRegionGraph", "no region " + std::to_string(id));
    return it->second;
}

Region& RegionGraph::region_mut(RegionId id) {
    auto it = regions_.find(id);
    if (it == regions_.end()) fail("InvalidRegionGraph", "no region " + std::to_string(id));
    return it->second;
}

std::vector<RegionId> RegionGraph::region_ids() const {
    std::vector<RegionId> ids;
    ids.reserve(regions_.size());
    for (const auto& [id, r] : regions_) ids.push_back(id);
    return ids;
}

std::vector<RegionId> RegionGraph::parents(RegionId id) const {
    std::vector<RegionId> out;
    for (auto it = redges_.lower_bound({id, std::numeric_limits<RegionId>::min()});
         it != redges_.end() && it->first == id; ++it)
        out.push_back(it->second);
    return out;
}

std::vector<RegionId> RegionGraph::children(RegionId id) const {
    std::vector<RegionId> out;
    for (auto it = edges_.lower_bound({id, std::numeric_limits<RegionId>::min()});
         it != edges_.end() && it->first == id; ++it)
        out.push_back(it->second);
    return out;
}

std::set<RegionId> RegionGraph::ancestors(RegionId id) const {
    std::set<RegionId> seen;
    std::deque<RegionId> work(1, id);
    while (!work.empty()) {
        RegionId cur = work.front();
        work.pop_front();
        for (RegionId p : parents(cur))
            if (seen.insert(p).second) work.push_back(p);
    }
    return seen;
}

std::set<RegionId> RegionGraph::descendants(RegionId id) const {
    std::set<RegionId> seen;
    std::deque<RegionId> work(1, id);
    while (!work.empty()) {
        RegionId cur = work.front();
        work.pop_front();
        for (RegionId c : children(cur))
            if (seen.insert(c).second) work.push_back(c);
    }
    return seen;
}

bool RegionGraph::is_outer(RegionId id) const { return parents(id).empty(); }

std::vector<RegionId> RegionGraph::outer_regions() const {
    std::vector<RegionId> out;
    for (const auto& [id, r] : regions_)
        if (is_outer(id)) out.push_back(id);
    return out;
}

std::vector<RegionId> RegionGraph::inner_regions() const {
    std::vector<RegionId> out;
    for (const auto& [id, r] : regions_)
        if (!is_outer(id)) out.push_back(id);
    return out;
}

std::vector<RegionId> RegionGraph::topological_order() const {
    std::map<RegionId, int> indeg;
    for (const auto& [id, r] : regions_) indeg[id] = 0;
    for (const auto& [p, c] : edges_) ++indeg[c];
    std::deque<RegionId> ready;
    for (const auto& [id, d] : indeg)
        if (d == 0) ready.push_back(id);
    std::vector<RegionId> order;
    while (!ready.empty()) {
        RegionId cur = ready.front();
        ready.pop_front();
        order.push_back(cur);
        for (RegionId c : children(cur))
            if (--indeg[c] == 0) ready.push_back(c);
    }
    if (order.size() != regions_.size()) fail("CyclicGraph", "region graph has a directed cycle");
    return order;
}

std::map<RegionId, int> RegionGraph::depths() const {
    std::map<RegionId, int> d;
    for (RegionId id : topological_order()) {
        int best = 0;
        for (RegionId p : parents(id)) best = std::max(best, d.at(p) + 1);
        d[id] = best;
    }
    return d;
}

std::vector<VarId> RegionGraph::all_vars() const {
    std::set<VarId> s;
    for (const auto& [id, r] : regions_) s.insert(r.vars.begin(), r.vars.end());
    return {s.begin(), s.end()};
}

void RegionGraph::set_factor_scope(FactorId f, std::vector<VarId> scope) {
    factor_scopes_[f] = sorted_unique(std::move(scope));
}

const std::vector<VarId>& RegionGraph::factor_scope(FactorId f) const {
    auto it = factor_scopes_.find(f);
    if (it == factor_scopes_.end())
        fail("InvalidRegionGraph", "unknown factor scope " + std::to_string(f));
    return it->second;
}

void RegionGraph::set_var_name(VarId v, std::string name) { var_names_[v] = std::move(name); }

std::string RegionGraph::var_name(VarId v) const {
    auto it = var_names_.find(v);
    return it != var_names_.end() ? it->second : "x" + std::to_string(v + 1);
}

void RegionGraph::set_factor_name(FactorId f, std::string name) {
    factor_names_[f] = std::move(name);
}

std::string RegionGraph::factor_name(FactorId f) const {
    auto it = factor_names_.find(f);
    return it != factor_names_.end() ? it->second : "f" + std::to_string(f);
}

CountingNumbers counting_numbers(const RegionGraph& rg) {
    CountingNumbers cn;
    std::map<RegionId, std::set<RegionId>> anc;
    for (RegionId id : rg.topological_order()) {
        std::set<RegionId> a;
        for (RegionId p : rg.parents(id)) {
            a.insert(p);
            const auto& pa = anc.at(p);
            a.insert(pa.begin(), pa.end());
        }
        int c = 1;
        for (RegionId x : a) c -= cn.c.at(x);
        cn.c[id] = c;
        cn.total += c;
        anc.emplace(id, std::move(a));
    }
    return cn;
}

int total_counting_number(const RegionGraph& rg) { return counting_numbers(rg).total; }

bool subsumes(const Region& r, const Region& d) {
    for (const auto& dc : d.cliques) {
        bool covered = false;
        for (const auto& rc : r.cliques)
            if (clique_contains(rc, dc)) {
                covered = true;
                break;
            }
        if (!covered) return false;
    }
    return true;
}

std::set<std::pair<VarId, VarId>> structure_graph(const RegionGraph& rg, RegionId rid) {
    const Region& r = rg.region(rid);
    std::set<std::pair<VarId, VarId>> es;
    auto link_all = [&](const std::vector<VarId>& vs) {
        for (std::size_t i = 0; i < vs.size(); ++i)
            for (std::size_t j = i + 1; j < vs.size(); ++j) es.insert({vs[i], vs[j]});
    };
    for (const auto& c : r.cliques) link_all(c.vars);
    for (FactorId f : r.factors) link_all(rg.factor_scope(f));
    return es;
}

ValidityReport validate(const RegionGraph& rg) {
    ValidityReport rep;
    auto problem = [&](const std::string& s) {
        rep.structure_ok = false;
        rep.problems.push_back(s);
    };

    // Per-region invariants.
    std::map<FactorId, int> factor_uses;
    for (const auto& [id, r] : rg.regions()) {
        std::set<VarId> covered;
        for (const auto& c : r.cliques) {
            if (!std::includes(r.vars.begin(), r.vars.end(), c.vars.begin(), c.vars.end()))
                problem("region " + std::to_string(id) + ": clique not inside region variables");
            covered.insert(c.vars.begin(), c.vars.end());
        }
        for (FactorId f : r.factors) {
            ++factor_uses[f];
            const auto& sc = rg.factor_scope(f);
            if (!std::includes(r.vars.begin(), r.vars.end(), sc.begin(), sc.end()))
                problem("region " + std::to_string(id) + ": factor scope not inside region variables");
            covered.insert(sc.begin(), sc.end());
        }
        for (VarId v : r.vars)
            if (!covered.count(v))
                problem("region " + std::to_string(id) + ": variable " + std::to_string(v) +
                        " in no clique or factor");
        if (!rg.is_outer(id) && !r.factors.empty())
            problem("region " + std::to_string(id) + ": inner region carries factors");
    }
    for (const auto& [f, uses] : factor_uses)
        if (uses > 1) problem("factor " + std::to_string(f) + " assigned to several regions");

    bool dag = true;
    try {
        rg.topological_order();
    } catch (const Error&) {
        dag = false;
        problem("directed cycle among regions");
    }

    // Hierarchy along every edge.
    for (const auto& [p, c] : rg.edges()) {
        bool ok = subsumes(rg.region(p), rg.region(c));
        rep.hierarchy_ok[{p, c}] = ok;
        if (!ok) rep.problems.push_back("edge " + std::to_string(p) + "->" + std::to_string(c) +
                                        ": parent does not subsume child");
    }

    // Connectedness and balancedness of RG(i).
    std::optional<CountingNumbers> cn;
    if (dag) cn = counting_numbers(rg);
    for (VarId v : rg.all_vars()) {
        std::vector<RegionId> members;
        for (const auto& [id, r] : rg.regions())
            if (std::binary_search(r.vars.begin(), r.vars.end(), v)) members.push_back(id);
        // undirected connectivity restricted to members
        std::set<RegionId> memberset(members.begin(), members.end());
        std::set<RegionId> seen;
        if (!members.empty()) {
            std::deque<RegionId> work(1, members.front());
            seen.insert(members.front());
            while (!work.empty()) {
                RegionId cur = work.front();
                work.pop_front();
                auto visit = [&](RegionId nb) {
                    if (memberset.count(nb) && seen.insert(nb).second) work.push_back(nb);
                };
                for (RegionId c : rg.children(cur)) visit(c);
                for (RegionId p : rg.parents(cur)) visit(p);
            }
        }
        bool conn = !members.empty() && seen.size() == members.size();
        rep.connected_per_variable[v] = conn;
        if (!conn)
            rep.problems.push_back("RG(" + std::to_string(v) + ") is not connected");
        bool bal = false;
        if (cn) {
            int s = 0;
            for (RegionId id : members) s += cn->c.at(id);
            bal = (s == 1);
        }
        rep.balanced_per_variable[v] = bal;
        if (!bal)
            rep.problems.push_back("counting numbers over RG(" + std::to_string(v) +
                                   ") do not sum to 1");
    }

    bool all_h = true;
    for (const auto& [e, ok] : rep.hierarchy_ok) all_h = all_h && ok;
    bool all_c = true, all_b = true;
    for (const auto& [v, ok] : rep.connected_per_variable) all_c = all_c && ok;
    for (const auto& [v, ok] : rep.balanced_per_variable) all_b = all_b && ok;
    rep.overall = rep.structure_ok && dag && all_h && all_c && all_b;
    return rep;
}

namespace {

struct AdjGraph {
    std::vector<VarId> verts;
    std::map<VarId, std::set<VarId>> adj;
};

AdjGraph union_graph(const std::vector<Clique>& cliques) {
    AdjGraph g;
    std::set<VarId> vs;
    for (const auto& c : cliques) {
        vs.insert(c.vars.begin(), c.vars.end());
        for (std::size_t i = 0; i < c.vars.size(); ++i)
            for (std::size_t j = i + 1; j < c.vars.size(); ++j) {
                g.adj[c.vars[i]].insert(c.vars[j]);
                g.adj[c.vars[j]].insert(c.vars[i]);
            }
    }
    g.verts.assign(vs.begin(), vs.end());
    return g;
}

} // namespace

bool is_decomposable(const std::vector<Clique>& cliques) {
    if (cliques.empty()) return true;
    AdjGraph g = union_graph(cliques);
    const std::size_t n = g.verts.size();

    // Maximum cardinality search; ties broken by lowest variable id.
    std::map<VarId, int> weight, order;
    for (VarId v : g.verts) weight[v] = 0;
    std::vector<VarId> seq;
    std::set<VarId> numbered;
    for (std::size_t step = 0; step < n; ++step) {
        VarId best = -1;
        int bw = -1;
        for (VarId v : g.verts)
            if (!numbered.count(v) && weight[v] > bw) {
                bw = weight[v];
                best = v;
            }
        numbered.insert(best);
        order[best] = static_cast<int>(step);
        seq.push_back(best);
        for (VarId u : g.adj[best])
            if (!numbered.count(u)) ++weight[u];
    }

    // Chordality: earlier neighbors of each vertex must form a clique through
    // their latest member.
    for (VarId v : seq) {
        std::vector<VarId> earlier;
        for (VarId u : g.adj[v])
            if (order[u] < order[v]) earlier.push_back(u);
        if (earlier.size() < 2) continue;
        VarId latest = earlier[0];
        for (VarId u : earlier)
            if (order[u] > order[latest]) latest = u;
        for (VarId u : earlier)
            if (u != latest && !g.adj[latest].count(u)) return false;
    }

    // Maximal cliques of the chordal graph: {v} + earlier neighbors, pruned.
    std::vector<Clique> found;
    for (VarId v : seq) {
        std::vector<VarId> c{v};
        for (VarId u : g.adj[v])
            if (order[u] < order[v]) c.push_back(u);
        found.push_back(make_clique(std::move(c)));
    }
    found = maximal_cliques(std::move(found));
    std::sort(found.begin(), found.end());

    std::vector<Clique> given = cliques;
    std::sort(given.begin(), given.end());
    given.erase(std::unique(given.begin(), given.end()), given.end());
    return found == given;
}

bool is_complete(const Region& r) {
    for (const auto& c : r.cliques)
        if (c.vars == r.vars) return true;
    return false;
}

bool is_acyclic(const RegionGraph& rg) {
    std::map<RegionId, int> idx;
    int n = 0;
    for (const auto& [id, r] : rg.regions()) idx[id] = n++;
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        return parent[static_cast<std::size_t>(x)] == x
                   ? x
                   : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
    };
    for (const auto& [p, c] : rg.edges()) {
        int a = find(idx[p]), b = find(idx[c]);
        if (a == b) return false;
        parent[static_cast<std::size_t>(a)] = b;
    }
    return true;
}

std::vector<Clique> maximal_cliques(std::vector<Clique> cliques) {
    std::sort(cliques.begin(), cliques.end());
    cliques.erase(std::unique(cliques.begin(), cliques.end()), cliques.end());
    std::vector<Clique> out;
    for (std::size_t i = 0; i < cliques.size(); ++i) {
        bool nested = false;
        for (std::size_t j = 0; j < cliques.size(); ++j)
            if (i != j && cliques[i].vars != cliques[j].vars &&
                clique_contains(cliques[j], cliques[i])) {
                nested = true;
                break;
            }
        if (!nested) out.push_back(cliques[i]);
    }
    return out;
}

bool isomorphic(const RegionGraph& a, const RegionGraph& b) {
    if (a.n_regions() != b.n_regions() || a.edges().size() != b.edges().size()) return false;
    std::map<std::vector<VarId>, std::vector<RegionId>> ga, gb;
    for (const auto& [id, r] : a.regions()) ga[r.vars].push_back(id);
    for (const auto& [id, r] : b.regions()) gb[r.vars].push_back(id);
    if (ga.size() != gb.size()) return false;
    std::map<RegionId, RegionId> m;
    for (const auto& [vars, ids] : ga) {
        auto it = gb.find(vars);
        if (it == gb.end() || it->second.size() != ids.size()) return false;
        if (ids.size() > 1) return false; // ambiguous var sets: not needed by this corpus
        m[ids[0]] = it->second[0];
    }
    for (const auto& [p, c] : a.edges())
        if (!b.has_edge(m.at(p), m.at(c))) return false;
    return true;
}

} // namespace srg

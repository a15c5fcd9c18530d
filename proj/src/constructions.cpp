#include "srg/constructions.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace srg {

namespace {

void attach_model(RegionGraph& g, const FactorGraph& fg) {
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        g.set_factor_scope(f, fg.factor(f).scope);
        g.set_factor_name(f, fg.factor(f).name);
    }
    for (VarId v = 0; v < fg.n_vars(); ++v) g.set_var_name(v, fg.variables()[static_cast<std::size_t>(v)].name);
}

bool subset_of(const std::vector<VarId>& inner, const std::vector<VarId>& outer) {
    return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

std::vector<VarId> sorted_unique(std::vector<VarId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void require_pairwise(const FactorGraph& fg, const char* who) {
    if (!fg.is_pairwise()) fail("NotPairwise", std::string(who) + ": model must be pairwise");
}

} // namespace

RegionGraph bethe(const FactorGraph& fg) {
    RegionGraph g;
    attach_model(g, fg);
    std::map<VarId, RegionId> node_region;
    for (VarId v = 0; v < fg.n_vars(); ++v)
        node_region[v] = g.add_region({v}, {Clique{{v}}});
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& scope = fg.factor(f).scope;
        RegionId outer = g.add_region(scope, {Clique{scope}}, {f});
        for (VarId v : scope) g.add_edge(outer, node_region[v]);
    }
    return g;
}

RegionGraph cluster_variation(const FactorGraph& fg,
                              const std::vector<std::vector<VarId>>& outer_clusters) {
    std::vector<std::vector<VarId>> clusters;
    for (auto c : outer_clusters) {
        c = sorted_unique(std::move(c));
        if (c.empty()) fail("InvalidRegionGraph", "empty cluster");
        clusters.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < clusters.size(); ++i)
        for (std::size_t j = 0; j < clusters.size(); ++j)
            if (i != j && subset_of(clusters[i], clusters[j]))
                fail("InvalidRegionGraph", "clusters must be distinct and not nested");
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        bool covered = false;
        for (const auto& c : clusters)
            if (subset_of(fg.factor(f).scope, c)) covered = true;
        if (!covered)
            fail("UncoveredFactor", "factor " + fg.factor(f).name + " fits in no cluster");
    }

    // close under pairwise intersection
    std::set<std::vector<VarId>> closure(clusters.begin(), clusters.end());
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::vector<VarId>> snapshot(closure.begin(), closure.end());
        for (std::size_t i = 0; i < snapshot.size(); ++i)
            for (std::size_t j = i + 1; j < snapshot.size(); ++j) {
                std::vector<VarId> inter;
                std::set_intersection(snapshot[i].begin(), snapshot[i].end(), snapshot[j].begin(),
                                      snapshot[j].end(), std::back_inserter(inter));
                if (!inter.empty() && !closure.count(inter)) {
                    closure.insert(inter);
                    grew = true;
                }
            }
    }

    // region ids: outer clusters in caller order, then the closure extras by
    // decreasing size / lexicographic order
    std::vector<std::vector<VarId>> extras;
    std::set<std::vector<VarId>> outer_set(clusters.begin(), clusters.end());
    for (const auto& s : closure)
        if (!outer_set.count(s)) extras.push_back(s);
    std::sort(extras.begin(), extras.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a < b;
    });

    RegionGraph g;
    attach_model(g, fg);
    std::map<std::vector<VarId>, RegionId> by_vars;
    for (const auto& c : clusters)
        if (!by_vars.count(c)) by_vars[c] = g.add_region(c, {Clique{c}});
    for (const auto& c : extras) by_vars[c] = g.add_region(c, {Clique{c}});

    // Hasse diagram: immediate containment only
    std::vector<std::vector<VarId>> all(closure.begin(), closure.end());
    for (const auto& x : all)
        for (const auto& y : all) {
            if (x == y || !subset_of(y, x)) continue;
            bool immediate = true;
            for (const auto& z : all)
                if (z != x && z != y && subset_of(y, z) && subset_of(z, x)) {
                    immediate = false;
                    break;
                }
            if (immediate) g.add_edge(by_vars[x], by_vars[y]);
        }

    for (FactorId f = 0; f < fg.n_factors(); ++f)
        for (const auto& c : clusters)
            if (subset_of(fg.factor(f).scope, c)) {
                Region& r = g.region_mut(by_vars[c]);
                r.factors.push_back(f);
                std::sort(r.factors.begin(), r.factors.end());
                break;
            }
    return g;
}

std::vector<std::vector<VarId>> star_clusters(const FactorGraph& fg, int width,
                                              const std::vector<VarId>& node_order) {
    require_pairwise(fg, "star_rg");
    const int n = fg.n_vars();
    if (width < 1) fail("WidthTooLarge", "width must be >= 1");
    if (width + 2 > n) fail("WidthTooLarge", "width + 2 must not exceed the variable count");
    std::vector<VarId> order = node_order;
    if (order.empty())
        for (VarId v = 0; v < n; ++v) order.push_back(v);
    if (static_cast<int>(order.size()) != n)
        fail("InvalidSize", "node order must list every variable");
    std::vector<VarId> roots(order.begin(), order.begin() + width);
    std::sort(roots.begin(), roots.end());
    std::set<VarId> rootset(roots.begin(), roots.end());

    std::set<std::vector<VarId>> cands;
    for (auto [i, j] : fg.pairwise_edges()) {
        bool ri = rootset.count(i), rj = rootset.count(j);
        if (ri && rj) continue; // inside the root set: covered by every cluster
        std::vector<VarId> c = roots;
        if (!ri) c.push_back(i);
        if (!rj) c.push_back(j);
        cands.insert(sorted_unique(std::move(c)));
    }
    if (cands.empty()) fail("InvalidSize", "no edges outside the root set");
    // absorb clusters nested inside another candidate
    std::vector<std::vector<VarId>> out;
    for (const auto& c : cands) {
        bool nested = false;
        for (const auto& d : cands)
            if (c != d && subset_of(c, d)) {
                nested = true;
                break;
            }
        if (!nested) out.push_back(c);
    }
    return out;
}

RegionGraph star_rg(const FactorGraph& fg, int width, const std::vector<VarId>& node_order) {
    return cluster_variation(fg, star_clusters(fg, width, node_order));
}

RegionGraph grid_boxes(const FactorGraph& fg, int grid_rows, int grid_cols, int box_rows,
                       int box_cols) {
    if (box_rows < 1 || box_cols < 1 || box_rows > grid_rows || box_cols > grid_cols)
        fail("InvalidDims", "box dimensions must fit inside the grid");
    if (grid_rows * grid_cols != fg.n_vars())
        fail("InvalidDims", "model size does not match the grid dimensions");
    auto positions = [](int extent, int box) {
        std::vector<int> ps;
        int last = extent - box;
        int step = std::max(1, box - 1);
        for (int p = 0; p < last; p += step) ps.push_back(p);
        ps.push_back(last);
        std::sort(ps.begin(), ps.end());
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
        return ps;
    };
    std::vector<std::vector<VarId>> clusters;
    for (int r : positions(grid_rows, box_rows))
        for (int c : positions(grid_cols, box_cols)) {
            std::vector<VarId> box;
            for (int dr = 0; dr < box_rows; ++dr)
                for (int dc = 0; dc < box_cols; ++dc)
                    box.push_back((r + dr) * grid_cols + (c + dc));
            clusters.push_back(sorted_unique(std::move(box)));
        }
    return cluster_variation(fg, clusters);
}

RegionGraph loop_graph(const FactorGraph& fg, const LoopSpec& spec,
                       const std::vector<std::pair<VarId, VarId>>& extra_edges) {
    require_pairwise(fg, "loop_graph");
    auto model_edges = fg.pairwise_edges();
    std::set<std::pair<VarId, VarId>> model_edge_set(model_edges.begin(), model_edges.end());

    // validate loops and collect their edges
    std::vector<std::vector<std::pair<VarId, VarId>>> loop_edge_lists;
    for (const auto& loop : spec.loops) {
        if (loop.size() < 3) fail("PreconditionViolated", "loop shorter than 3");
        std::set<VarId> distinct(loop.begin(), loop.end());
        if (distinct.size() != loop.size()) fail("PreconditionViolated", "loop revisits a variable");
        std::vector<std::pair<VarId, VarId>> es;
        for (std::size_t i = 0; i < loop.size(); ++i) {
            VarId u = loop[i], w = loop[(i + 1) % loop.size()];
            auto [a, b] = std::minmax(u, w);
            if (!model_edge_set.count({a, b}))
                fail("PreconditionViolated", "loop uses a non-edge of the model");
            es.push_back({a, b});
        }
        loop_edge_lists.push_back(std::move(es));
    }

    RegionGraph g;
    attach_model(g, fg);

    std::vector<RegionId> loop_regions;
    std::map<std::pair<VarId, VarId>, std::vector<std::size_t>> edge_owners;
    for (std::size_t l = 0; l < loop_edge_lists.size(); ++l) {
        std::vector<VarId> vars;
        std::vector<Clique> cliques;
        for (auto [a, b] : loop_edge_lists[l]) {
            vars.push_back(a);
            vars.push_back(b);
            cliques.push_back(Clique{{a, b}});
            edge_owners[{a, b}].push_back(l);
        }
        loop_regions.push_back(g.add_region(sorted_unique(std::move(vars)), cliques));
    }

    // edge regions: loop edges, explicit extras, and uncovered factor edges
    std::set<std::pair<VarId, VarId>> edge_regions_wanted;
    for (const auto& [e, owners] : edge_owners) edge_regions_wanted.insert(e);
    for (auto e : extra_edges) {
        auto [a, b] = std::minmax(e.first, e.second);
        edge_regions_wanted.insert({a, b});
    }
    for (auto e : model_edges)
        edge_regions_wanted.insert(e);

    // factor placement: covered pairwise factors go to the first owning loop,
    // uncovered ones to their own outer edge region; unary factors get
    // single-variable outer regions (keeps the loop-free case equal to Bethe)
    std::map<std::pair<VarId, VarId>, std::vector<FactorId>> edge_factors;
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        if (sc.size() != 2) continue;
        std::pair<VarId, VarId> e{sc[0], sc[1]};
        auto it = edge_owners.find(e);
        if (it != edge_owners.end()) {
            Region& r = g.region_mut(loop_regions[it->second.front()]);
            r.factors.push_back(f);
            std::sort(r.factors.begin(), r.factors.end());
        } else {
            edge_factors[e].push_back(f);
        }
    }

    std::map<std::pair<VarId, VarId>, RegionId> edge_region;
    for (const auto& e : edge_regions_wanted) {
        std::vector<FactorId> fs;
        auto it = edge_factors.find(e);
        bool covered = edge_owners.count(e) != 0;
        if (it != edge_factors.end() && !covered) fs = it->second;
        edge_region[e] = g.add_region({e.first, e.second}, {Clique{{e.first, e.second}}}, fs);
        if (covered && it != edge_factors.end())
            fail("UnassignedFactor", "factor on a covered edge could not be placed");
    }
    for (const auto& [e, owners] : edge_owners)
        for (std::size_t l : owners) g.add_edge(loop_regions[l], edge_region[e]);

    std::map<VarId, RegionId> bias_region;
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        if (sc.size() != 1) continue;
        VarId v = sc[0];
        if (bias_region.count(v)) {
            Region& r = g.region_mut(bias_region[v]);
            r.factors.push_back(f);
            std::sort(r.factors.begin(), r.factors.end());
        } else {
            bias_region[v] = g.add_region({v}, {Clique{{v}}}, {f});
        }
    }

    // node regions wherever two or more incident regions meet
    std::map<VarId, std::vector<RegionId>> incident;
    for (const auto& [e, id] : edge_region) {
        incident[e.first].push_back(id);
        incident[e.second].push_back(id);
    }
    for (const auto& [v, id] : bias_region) incident[v].push_back(id);
    for (const auto& [v, ids] : incident) {
        if (ids.size() < 2) continue;
        RegionId node = g.add_region({v}, {Clique{{v}}});
        for (RegionId p : ids) g.add_edge(p, node);
    }
    return g;
}

RegionGraph ep_graph(const FactorGraph& fg, const EpGraphSpec& spec) {
    std::vector<Clique> base;
    for (const auto& c : spec.base_cliques) base.push_back(make_clique(c.vars));
    std::vector<VarId> base_vars;
    for (const auto& c : base)
        base_vars = sorted_unique([&] {
            auto v = base_vars;
            v.insert(v.end(), c.vars.begin(), c.vars.end());
            return v;
        }());
    std::vector<VarId> all_vars;
    for (VarId v = 0; v < fg.n_vars(); ++v) all_vars.push_back(v);
    if (base_vars != all_vars)
        fail("BaseNotDecomposable", "base cliques must cover every variable");
    if (!is_decomposable(maximal_cliques(base)))
        fail("BaseNotDecomposable", "base cliques are not decomposable");

    std::vector<int> seen(static_cast<std::size_t>(fg.n_factors()), 0);
    for (const auto& o : spec.outers)
        for (FactorId f : o.factors) {
            if (f < 0 || f >= fg.n_factors()) fail("InvalidRegionGraph", "unknown factor id");
            ++seen[static_cast<std::size_t>(f)];
        }
    for (FactorId f = 0; f < fg.n_factors(); ++f)
        if (seen[static_cast<std::size_t>(f)] != 1)
            fail("InvalidRegionGraph",
                 "factor " + fg.factor(f).name + " must be assigned to exactly one outer region");

    RegionGraph g;
    attach_model(g, fg);
    RegionId base_id = -1;
    std::vector<RegionId> outer_ids;
    for (const auto& o : spec.outers) {
        std::vector<Clique> cl = base;
        for (const auto& c : o.extra_cliques) cl.push_back(make_clique(c.vars));
        cl = maximal_cliques(std::move(cl));
        outer_ids.push_back(g.add_region(all_vars, cl, o.factors));
    }
    base_id = g.add_region(all_vars, base);
    for (RegionId o : outer_ids) g.add_edge(o, base_id);
    return g;
}

LoopSpec grid_faces(int rows, int cols) {
    if (rows < 2 || cols < 2) fail("InvalidDims", "grid faces need at least a 2x2 grid");
    LoopSpec spec;
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            VarId a = r * cols + c;
            spec.loops.push_back({a, a + 1, a + cols + 1, a + cols});
        }
    return spec;
}

EpGraphSpec ep_factorized_spec(const FactorGraph& fg) {
    require_pairwise(fg, "ep_factorized_spec");
    EpGraphSpec spec;
    for (VarId v = 0; v < fg.n_vars(); ++v) spec.base_cliques.push_back(Clique{{v}});
    std::map<std::pair<VarId, VarId>, std::size_t> outer_of_edge;
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        if (sc.size() != 2) continue;
        std::pair<VarId, VarId> e{sc[0], sc[1]};
        if (!outer_of_edge.count(e)) {
            outer_of_edge[e] = spec.outers.size();
            spec.outers.push_back({{Clique{sc}}, {}});
        }
        spec.outers[outer_of_edge[e]].factors.push_back(f);
    }
    // unary factors ride with the first outer region covering their variable
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        if (sc.size() != 1) continue;
        bool placed = false;
        for (auto& o : spec.outers) {
            for (const auto& c : o.extra_cliques)
                if (std::binary_search(c.vars.begin(), c.vars.end(), sc[0])) {
                    o.factors.push_back(f);
                    placed = true;
                    break;
                }
            if (placed) break;
        }
        if (!placed) fail("InvalidRegionGraph", "unary factor on an isolated variable");
    }
    return spec;
}

EpGraphSpec ep_grid_tree_spec(const FactorGraph& fg, int rows, int cols) {
    require_pairwise(fg, "ep_grid_tree_spec");
    if (rows < 2 || cols < 2) fail("InvalidDims", "need at least a 2x2 grid");
    if (rows * cols != fg.n_vars()) fail("InvalidDims", "model does not match the grid");
    auto vid = [&](int r, int c) { return static_cast<VarId>(r * cols + c); };

    EpGraphSpec spec;
    // comb spanning tree: every row edge plus the first column
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c)
            spec.base_cliques.push_back(Clique{{vid(r, c), vid(r, c + 1)}});
    for (int r = 0; r + 1 < rows; ++r)
        spec.base_cliques.push_back(Clique{{vid(r, 0), vid(r + 1, 0)}});

    const int bands = rows - 1;
    spec.outers.resize(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b)
        for (int c = 1; c < cols; ++c)
            spec.outers[static_cast<std::size_t>(b)].extra_cliques.push_back(
                Clique{{vid(b, c), vid(b + 1, c)}});

    // every factor must sit inside its band's ladder
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        int band;
        if (sc.size() == 1) {
            band = std::min(sc[0] / cols, bands - 1);
        } else {
            int r1 = sc[0] / cols;
            int r2 = sc[1] / cols;
            if (r1 == r2)
                band = std::min(r1, bands - 1); // horizontal edge in row r1
            else
                band = std::min(r1, r2); // vertical rung
        }
        spec.outers[static_cast<std::size_t>(band)].factors.push_back(f);
    }
    return spec;
}

EpGraphSpec ep_k23_spec(const FactorGraph& fg) {
    require_pairwise(fg, "ep_k23_spec");
    if (fg.n_vars() != 5) fail("InvalidDims", "expected the 2x3 complete bipartite model");
    // hubs 0,1; spokes 2,3,4. The base is a star at hub 0 whose spanning tree
    // uses the phantom hub chord {0,1}: that chord has no factor, but it is
    // what later becomes the shared edge region linking the two loops.
    EpGraphSpec spec;
    spec.base_cliques = {Clique{{0, 1}}, Clique{{0, 2}}, Clique{{0, 3}}, Clique{{0, 4}}};
    spec.outers.resize(2);
    spec.outers[0].extra_cliques = {Clique{{1, 2}}, Clique{{1, 3}}}; // loop 0-2-1-3
    spec.outers[1].extra_cliques = {Clique{{1, 2}}, Clique{{1, 4}}}; // loop 0-2-1-4
    for (FactorId f = 0; f < fg.n_factors(); ++f) {
        const auto& sc = fg.factor(f).scope;
        bool in_first;
        if (sc.size() == 2) {
            std::set<VarId> s(sc.begin(), sc.end());
            in_first = !s.count(4);
        } else {
            in_first = sc[0] != 4;
        }
        spec.outers[in_first ? 0 : 1].factors.push_back(f);
    }
    return spec;
}

} // namespace srg

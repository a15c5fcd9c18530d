#include "srg/reductions.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace srg {

std::string to_string(ReductionOp op) {
    switch (op) {
        case ReductionOp::LinkDeath: return "link-death";
        case ReductionOp::GrowShrink: return "grow/shrink";
        case ReductionOp::Drop: return "drop";
        case ReductionOp::FactorMove: return "factor-move";
        case ReductionOp::Merge: return "merge";
        case ReductionOp::Split: return "split";
        case ReductionOp::DuplicateMerge: return "duplicate-merge";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::NonSingular: return "NonSingular";
        case Verdict::Singular: return "Singular";
        case Verdict::Unknown: return "Unknown";
    }
    return "?";
}

namespace {

std::set<RegionId> anc_star(const RegionGraph& g, RegionId r) {
    auto a = g.ancestors(r);
    a.insert(r);
    return a;
}

bool reachable_without_edge(const RegionGraph& g, RegionId from, RegionId to) {
    std::set<RegionId> seen{from};
    std::deque<RegionId> work(1, from);
    while (!work.empty()) {
        RegionId cur = work.front();
        work.pop_front();
        for (RegionId c : g.children(cur)) {
            if (cur == from && c == to) continue; // skip the direct link
            if (c == to) return true;
            if (seen.insert(c).second) work.push_back(c);
        }
    }
    return false;
}

std::vector<VarId> sorted_vec(std::vector<VarId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<VarId> union_of(const std::vector<VarId>& a, const std::vector<VarId>& b) {
    std::vector<VarId> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool subset_of(const std::vector<VarId>& inner, const std::vector<VarId>& outer) {
    return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

/// Connected components of `verts` under `adj`, ignoring vertices in `excluded`.
std::vector<std::vector<VarId>> components_excluding(
    const std::vector<VarId>& verts, const std::map<VarId, std::set<VarId>>& adj,
    const std::set<VarId>& excluded) {
    std::set<VarId> remaining;
    for (VarId v : verts)
        if (!excluded.count(v)) remaining.insert(v);
    std::vector<std::vector<VarId>> comps;
    while (!remaining.empty()) {
        VarId start = *remaining.begin();
        std::vector<VarId> comp;
        std::deque<VarId> work(1, start);
        remaining.erase(start);
        comp.push_back(start);
        while (!work.empty()) {
            VarId cur = work.front();
            work.pop_front();
            auto it = adj.find(cur);
            if (it == adj.end()) continue;
            for (VarId nb : it->second)
                if (remaining.count(nb)) {
                    remaining.erase(nb);
                    comp.push_back(nb);
                    work.push_back(nb);
                }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    std::sort(comps.begin(), comps.end());
    return comps;
}

std::map<VarId, std::set<VarId>> adjacency_of(const std::set<std::pair<VarId, VarId>>& edges) {
    std::map<VarId, std::set<VarId>> adj;
    for (auto [a, b] : edges) {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    return adj;
}

std::string vars_to_string(const RegionGraph& g, const std::vector<VarId>& vs) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < vs.size(); ++i) os << (i ? "," : "") << g.var_name(vs[i]);
    os << "}";
    return os.str();
}

} // namespace

RegionGraph link_death(const RegionGraph& rg, RegionId parent, RegionId child) {
    if (!rg.has_edge(parent, child)) fail("PreconditionViolated", "link_death: no such edge");
    if (!reachable_without_edge(rg, parent, child)) {
        auto others = rg.parents(child);
        others.erase(std::remove(others.begin(), others.end(), parent), others.end());
        bool ok = false;
        if (!others.empty()) {
            auto ancR = rg.ancestors(parent); // proper ancestors of R
            auto ancR_star = anc_star(rg, parent);
            std::map<RegionId, std::set<RegionId>> other_star;
            for (RegionId p : others) other_star[p] = anc_star(rg, p);
            for (RegionId a : ancR) {
                bool forms_loop = false;
                for (RegionId p : others)
                    if (other_star[p].count(a)) {
                        forms_loop = true;
                        break;
                    }
                if (!forms_loop) continue;
                auto allowed = anc_star(rg, a); // A together with an(A)
                bool all_ok = true;
                for (RegionId p : others) {
                    for (RegionId x : other_star[p]) {
                        if (ancR_star.count(x) && !allowed.count(x)) {
                            all_ok = false;
                            break;
                        }
                    }
                    if (!all_ok) break;
                }
                if (all_ok) {
                    ok = true;
                    break;
                }
            }
        }
        if (!ok)
            fail("PreconditionViolated",
                 "link_death: child is not otherwise reachable and no shared ancestor "
                 "satisfies the loop conditions");
    }
    RegionGraph out = rg;
    out.remove_edge(parent, child);
    return out;
}

RegionGraph grow_shrink(const RegionGraph& rg, RegionId region,
                        const std::vector<Clique>& add_cliques,
                        const std::vector<Clique>& remove_cliques) {
    const Region& r = rg.region(region);
    if (!rg.is_outer(region)) fail("NotOuterRegion", "grow/shrink applies to outer regions only");
    std::set<Clique> cl(r.cliques.begin(), r.cliques.end());
    for (const auto& c : add_cliques) cl.insert(make_clique(c.vars));
    for (const auto& c : remove_cliques) {
        Clique key = make_clique(c.vars);
        if (!cl.erase(key))
            fail("PreconditionViolated", "grow_shrink: removed clique is not present");
    }
    std::vector<Clique> cliques(cl.begin(), cl.end());
    // children must stay subsumed by what remains
    Region candidate = r;
    candidate.cliques = cliques;
    for (RegionId c : rg.children(region))
        if (!subsumes(candidate, rg.region(c)))
            fail("ChildCliqueOrphaned", "grow_shrink: a child clique would lose its cover");
    // variables kept only while a clique or factor covers them
    std::vector<VarId> vars;
    for (const auto& c : cliques) vars = union_of(vars, c.vars);
    for (FactorId f : r.factors) vars = union_of(vars, rg.factor_scope(f));
    if (vars.empty()) fail("PreconditionViolated", "grow_shrink: region would become empty");
    RegionGraph out = rg;
    Region& m = out.region_mut(region);
    m.cliques = std::move(cliques);
    m.vars = std::move(vars);
    return out;
}

RegionGraph drop(const RegionGraph& rg, RegionId region) {
    auto ps = rg.parents(region);
    if (ps.size() != 1)
        fail("MultipleParents", "drop: region must have exactly one parent (has " +
                                    std::to_string(ps.size()) + ")");
    RegionGraph out = rg;
    RegionId parent = ps[0];
    auto kids = out.children(region);
    out.remove_region(region);
    for (RegionId c : kids)
        if (!out.has_edge(parent, c)) out.add_edge(parent, c);
    return out;
}

RegionGraph factor_move(const RegionGraph& rg, FactorId factor, RegionId from, RegionId to) {
    const Region& rf = rg.region(from);
    rg.region(to);
    if (!rg.is_outer(from) || !rg.is_outer(to))
        fail("PreconditionViolated", "factor_move: both regions must be outer");
    if (!std::binary_search(rf.factors.begin(), rf.factors.end(), factor))
        fail("PreconditionViolated", "factor_move: factor not in source region");
    const auto& scope = rg.factor_scope(factor);
    auto cf = rg.children(from);
    auto ct = rg.children(to);
    std::vector<RegionId> shared;
    std::set_intersection(cf.begin(), cf.end(), ct.begin(), ct.end(), std::back_inserter(shared));
    bool covered = false;
    for (RegionId d : shared)
        for (const auto& c : rg.region(d).cliques)
            if (subset_of(scope, c.vars)) {
                covered = true;
                break;
            }
    if (!covered)
        fail("NoCoveringSharedChildClique",
             "factor_move: no shared child clique covers the factor scope");
    RegionGraph out = rg;
    Region& src = out.region_mut(from);
    src.factors.erase(std::remove(src.factors.begin(), src.factors.end(), factor),
                      src.factors.end());
    std::vector<VarId> vars;
    for (const auto& c : src.cliques) vars = union_of(vars, c.vars);
    for (FactorId f : src.factors) vars = union_of(vars, out.factor_scope(f));
    src.vars = std::move(vars);
    Region& dst = out.region_mut(to);
    if (!subset_of(scope, dst.vars))
        fail("PreconditionViolated", "factor_move: destination does not cover the factor scope");
    dst.factors.push_back(factor);
    std::sort(dst.factors.begin(), dst.factors.end());
    return out;
}

RegionGraph merge(const RegionGraph& rg, RegionId parent, RegionId child) {
    if (!rg.has_edge(parent, child)) fail("PreconditionViolated", "merge: no such edge");
    const Region& rp = rg.region(parent);
    const Region& rc = rg.region(child);
    if (!rp.factors.empty())
        fail("PreconditionViolated", "merge clause 1: parent carries factors");
    if (!subsumes(rp, rc) || !subsumes(rc, rp))
        fail("PreconditionViolated", "merge clause 2: regions do not subsume each other");
    auto child_star = anc_star(rg, child);
    auto allowed = anc_star(rg, parent); // R together with an(R)
    for (RegionId d : rg.children(parent)) {
        if (d == child) continue;
        for (RegionId x : anc_star(rg, d))
            if (child_star.count(x) && !allowed.count(x))
                fail("PreconditionViolated",
                     "merge clause 3: another child shares ancestry with the merged child");
    }

    auto cn_before = counting_numbers(rg);
    int expected = cn_before.at(parent) + cn_before.at(child);

    RegionGraph out = rg;
    std::set<RegionId> ps, cs;
    for (RegionId p : rg.parents(parent)) ps.insert(p);
    for (RegionId p : rg.parents(child)) ps.insert(p);
    for (RegionId c : rg.children(parent)) cs.insert(c);
    for (RegionId c : rg.children(child)) cs.insert(c);
    ps.erase(parent);
    ps.erase(child);
    cs.erase(parent);
    cs.erase(child);

    std::set<Clique> cl(rp.cliques.begin(), rp.cliques.end());
    cl.insert(rc.cliques.begin(), rc.cliques.end());
    Region& m = out.region_mut(child);
    m.vars = union_of(rp.vars, rc.vars);
    m.cliques.assign(cl.begin(), cl.end());
    out.remove_region(parent);
    for (RegionId p : ps)
        if (!out.has_edge(p, child)) out.add_edge(p, child);
    for (RegionId c : cs)
        if (!out.has_edge(child, c)) out.add_edge(child, c);

    auto cn_after = counting_numbers(out);
    if (cn_after.at(child) != expected)
        fail("PreconditionViolated",
             "merge: counting number of the merged region is not the prior sum");
    return out;
}

namespace {

struct SplitCheck {
    std::string code, message;
};

std::optional<SplitCheck> check_split(const RegionGraph& rg, RegionId rid,
                                      const SplitPartition& part) {
    const Region& r = rg.region(rid);
    auto a = sorted_vec(part.a), b = sorted_vec(part.b), s = sorted_vec(part.s);
    if (a.empty() || b.empty()) return SplitCheck{"PreconditionViolated", "A and B must be nonempty"};
    std::vector<VarId> all = union_of(union_of(a, b), s);
    if (all != r.vars || a.size() + b.size() + s.size() != all.size())
        return SplitCheck{"PreconditionViolated", "(A,B,S) must partition the region variables"};

    auto adj = adjacency_of(structure_graph(rg, rid));
    std::set<VarId> sset(s.begin(), s.end());
    auto comps = components_excluding(r.vars, adj, sset);
    std::set<VarId> aset(a.begin(), a.end()), bset(b.begin(), b.end());
    for (const auto& comp : comps) {
        bool has_a = false, has_b = false;
        for (VarId v : comp) {
            has_a = has_a || aset.count(v);
            has_b = has_b || bset.count(v);
        }
        if (has_a && has_b)
            return SplitCheck{"NotASeparator", "S does not separate A from B in the structure"};
    }

    auto as = union_of(a, s), bs = union_of(b, s);
    if (!s.empty()) {
        bool ka = false, kb = false;
        for (const auto& c : r.cliques) {
            if (subset_of(s, c.vars) && subset_of(c.vars, as)) ka = true;
            if (subset_of(s, c.vars) && subset_of(c.vars, bs)) kb = true;
        }
        if (!ka || !kb)
            return SplitCheck{"SeparatorNotComplete",
                              "each side must retain a clique covering the separator"};
    }

    std::vector<Clique> ra_cl, rb_cl;
    for (const auto& c : r.cliques) {
        if (subset_of(c.vars, as)) ra_cl.push_back(c);
        if (subset_of(c.vars, bs)) rb_cl.push_back(c);
    }
    auto side_subsumes = [](const std::vector<Clique>& side, const Region& d) {
        for (const auto& dc : d.cliques) {
            bool cov = false;
            for (const auto& k : side)
                if (clique_contains(k, dc)) {
                    cov = true;
                    break;
                }
            if (!cov) return false;
        }
        return true;
    };
    for (RegionId dc : rg.children(rid)) {
        const Region& d = rg.region(dc);
        bool adopted = !s.empty();
        if (adopted)
            for (const auto& c : d.cliques)
                if (!subset_of(c.vars, s)) {
                    adopted = false;
                    break;
                }
        if (adopted) continue;
        if (!side_subsumes(ra_cl, d) && !side_subsumes(rb_cl, d))
            return SplitCheck{"ChildStraddlesSplit",
                              "child " + std::to_string(dc) + " fits neither side"};
    }

    for (FactorId f : r.factors) {
        const auto& sc = rg.factor_scope(f);
        if (!subset_of(sc, as) && !subset_of(sc, bs))
            return SplitCheck{"FactorUncovered",
                              "factor " + std::to_string(f) + " fits neither side"};
    }
    return std::nullopt;
}

} // namespace

RegionGraph split(const RegionGraph& rg, RegionId region, const SplitPartition& part) {
    if (auto bad = check_split(rg, region, part)) fail(bad->code, "split: " + bad->message);
    const Region r = rg.region(region); // copy: the region is removed below
    auto a = sorted_vec(part.a), b = sorted_vec(part.b), s = sorted_vec(part.s);
    auto as = union_of(a, s), bs = union_of(b, s);

    std::vector<Clique> ra_cl, rb_cl, rs_cl;
    for (const auto& c : r.cliques) {
        if (subset_of(c.vars, as)) ra_cl.push_back(c);
        if (subset_of(c.vars, bs)) rb_cl.push_back(c);
        if (subset_of(c.vars, s)) rs_cl.push_back(c);
    }
    std::vector<FactorId> fa, fb;
    for (FactorId f : r.factors) {
        // ties (scope inside S) go to the A side
        if (subset_of(rg.factor_scope(f), as))
            fa.push_back(f);
        else
            fb.push_back(f);
    }

    RegionGraph out = rg;
    RegionId ra = out.add_region(as, ra_cl, fa);
    RegionId rb = out.add_region(bs, rb_cl, fb);
    RegionId rs = -1;
    if (!s.empty()) {
        rs_cl.push_back(Clique{s});
        rs = out.add_region(s, rs_cl);
    }

    for (RegionId p : rg.parents(region)) {
        out.add_edge(p, ra);
        out.add_edge(p, rb);
    }
    if (rs >= 0) {
        out.add_edge(ra, rs);
        out.add_edge(rb, rs);
        // the separator region adopts every descendant it subsumes
        for (RegionId d : rg.descendants(region))
            if (subsumes(out.region(rs), rg.region(d))) out.add_edge(rs, d);
    }
    for (RegionId d : rg.children(region)) {
        if (rs >= 0 && out.has_edge(rs, d)) continue;
        if (subsumes(out.region(ra), rg.region(d)))
            out.add_edge(ra, d);
        else
            out.add_edge(rb, d);
    }
    out.remove_region(region);
    return out;
}

RegionGraph duplicate_merge(const RegionGraph& rg) { return duplicate_merge(rg, {}); }

RegionGraph duplicate_merge(const RegionGraph& rg, const ReductionObserver& obs) {
    RegionGraph g = rg;
    bool changed = true;
    while (changed) {
        changed = false;
        std::map<std::tuple<std::vector<VarId>, std::vector<Clique>, std::vector<FactorId>>,
                 std::vector<RegionId>>
            groups;
        for (const auto& [id, r] : g.regions())
            groups[{r.vars, r.cliques, r.factors}].push_back(id);
        for (auto& [key, ids] : groups) {
            if (ids.size() < 2) continue;
            std::sort(ids.begin(), ids.end());
            RegionId keeper = ids.front();
            std::set<RegionId> grp(ids.begin(), ids.end());
            std::set<RegionId> ps, cs;
            for (RegionId m : ids) {
                for (RegionId p : g.parents(m))
                    if (!grp.count(p)) ps.insert(p);
                for (RegionId c : g.children(m))
                    if (!grp.count(c)) cs.insert(c);
            }
            int before = total_counting_number(g);
            for (RegionId m : ids)
                if (m != keeper) g.remove_region(m);
            for (RegionId p : ps)
                if (!g.has_edge(p, keeper)) g.add_edge(p, keeper);
            for (RegionId c : cs)
                if (!g.has_edge(keeper, c)) g.add_edge(keeper, c);
            changed = true;
            if (obs) {
                ReductionStep st{ReductionOp::DuplicateMerge,
                                 "fused " + std::to_string(ids.size()) + " copies of " +
                                     vars_to_string(g, g.region(keeper).vars),
                                 before, total_counting_number(g), false, 0};
                obs(st, g);
            }
            break; // group map is stale after edits
        }
    }
    return g;
}

SplitPartition find_split(const Region& r) {
    if (is_complete(r)) fail("RegionComplete", "find_split: region is already complete");
    auto pruned = maximal_cliques(r.cliques);
    if (!is_decomposable(pruned))
        fail("NotDecomposable", "find_split: cliques are not decomposable");
    std::vector<VarId> covered;
    for (const auto& c : pruned) covered = union_of(covered, c.vars);
    if (covered != r.vars)
        fail("NotDecomposable", "find_split: cliques do not cover the region variables");

    // components of the union graph
    std::set<std::pair<VarId, VarId>> ug;
    for (const auto& c : pruned)
        for (std::size_t i = 0; i < c.vars.size(); ++i)
            for (std::size_t j = i + 1; j < c.vars.size(); ++j)
                ug.insert({c.vars[i], c.vars[j]});
    auto comps = components_excluding(r.vars, adjacency_of(ug), {});
    if (comps.size() >= 2) {
        SplitPartition p;
        p.a = comps.front();
        for (std::size_t i = 1; i < comps.size(); ++i) p.b = union_of(p.b, comps[i]);
        return p;
    }

    // junction tree by maximum spanning forest over separator sizes
    struct JEdge {
        std::size_t i, j;
        Clique sep;
    };
    std::vector<JEdge> jedges;
    for (std::size_t i = 0; i < pruned.size(); ++i)
        for (std::size_t j = i + 1; j < pruned.size(); ++j) {
            std::vector<VarId> inter;
            std::set_intersection(pruned[i].vars.begin(), pruned[i].vars.end(),
                                  pruned[j].vars.begin(), pruned[j].vars.end(),
                                  std::back_inserter(inter));
            if (!inter.empty()) jedges.push_back({i, j, Clique{inter}});
        }
    std::stable_sort(jedges.begin(), jedges.end(), [](const JEdge& x, const JEdge& y) {
        if (x.sep.vars.size() != y.sep.vars.size()) return x.sep.vars.size() > y.sep.vars.size();
        if (x.sep.vars != y.sep.vars) return x.sep.vars < y.sep.vars;
        return std::tie(x.i, x.j) < std::tie(y.i, y.j);
    });
    std::vector<std::size_t> uf(pruned.size());
    for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return uf[x] == x ? x : uf[x] = find(uf[x]);
    };
    std::vector<std::pair<std::size_t, std::size_t>> tree;
    std::optional<JEdge> first;
    for (const auto& e : jedges) {
        std::size_t a = find(e.i), b = find(e.j);
        if (a == b) continue;
        uf[a] = b;
        if (!first) first = e;
        tree.push_back({e.i, e.j});
    }
    if (!first) fail("NotDecomposable", "find_split: no junction separator found");

    // halves of the clique tree after removing the first edge
    std::map<std::size_t, std::set<std::size_t>> tadj;
    for (auto [i, j] : tree) {
        if (i == first->i && j == first->j) continue;
        tadj[i].insert(j);
        tadj[j].insert(i);
    }
    std::set<std::size_t> seen{first->i};
    std::deque<std::size_t> work(1, first->i);
    while (!work.empty()) {
        std::size_t cur = work.front();
        work.pop_front();
        for (std::size_t nb : tadj[cur])
            if (seen.insert(nb).second) work.push_back(nb);
    }
    std::vector<VarId> side_a, side_b;
    for (std::size_t i = 0; i < pruned.size(); ++i) {
        if (seen.count(i))
            side_a = union_of(side_a, pruned[i].vars);
        else
            side_b = union_of(side_b, pruned[i].vars);
    }
    SplitPartition p;
    p.s = first->sep.vars;
    std::set<VarId> sset(p.s.begin(), p.s.end());
    for (VarId v : side_a)
        if (!sset.count(v)) p.a.push_back(v);
    for (VarId v : side_b)
        if (!sset.count(v)) p.b.push_back(v);
    if (!p.b.empty() && !p.a.empty() && p.b.front() < p.a.front()) std::swap(p.a, p.b);
    return p;
}

// ------------------------------------------------------------------
// reduction pipeline
// ------------------------------------------------------------------

namespace {

struct Pipeline {
    RegionGraph g;
    std::vector<ReductionStep>* trace = nullptr;
    const ReductionObserver* obs = nullptr;
    int steps = 0;

    void emit(ReductionOp op, std::string detail, int before, bool empty_sep = false,
              int c_target = 0) {
        ++steps;
        ReductionStep st{op, std::move(detail), before, total_counting_number(g), empty_sep,
                         c_target};
        if (trace) trace->push_back(st);
        if (obs && *obs) (*obs)(st, g);
    }

    /// Removing a clique nested inside another clique of the same region keeps
    /// the family and the constraint set equivalent, so fixed points survive.
    bool prune_nested_pass() {
        bool changed = false;
        for (RegionId id : g.region_ids()) {
            Region& r = g.region_mut(id);
            auto pruned = maximal_cliques(r.cliques);
            if (pruned != r.cliques) {
                int before = total_counting_number(g);
                r.cliques = std::move(pruned);
                emit(ReductionOp::GrowShrink, "pruned nested cliques in " + std::to_string(id),
                     before);
                changed = true;
            }
        }
        return changed;
    }

    bool duplicate_pass() {
        std::size_t n = g.n_regions();
        auto cb = [&](const ReductionStep& st, const RegionGraph& after) {
            ++steps;
            if (trace) trace->push_back(st);
            if (obs && *obs) (*obs)(st, after);
        };
        g = duplicate_merge(g, cb);
        return g.n_regions() != n;
    }

    bool link_death_pass() {
        bool any = false;
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<std::pair<RegionId, RegionId>> es(g.edges().begin(), g.edges().end());
            for (auto [p, c] : es) {
                if (reachable_without_edge(g, p, c)) {
                    int before = total_counting_number(g);
                    g = link_death(g, p, c);
                    emit(ReductionOp::LinkDeath,
                         std::to_string(p) + "->" + std::to_string(c), before);
                    any = changed = true;
                    break;
                }
            }
        }
        return any;
    }

    bool drop_pass() {
        bool any = false;
        bool changed = true;
        while (changed) {
            changed = false;
            for (RegionId id : g.region_ids()) {
                if (g.parents(id).size() == 1) {
                    int before = total_counting_number(g);
                    std::string what = vars_to_string(g, g.region(id).vars);
                    g = drop(g, id);
                    emit(ReductionOp::Drop, "dropped " + std::to_string(id) + " " + what, before);
                    any = changed = true;
                    break;
                }
            }
        }
        return any;
    }

    /// Outer-region cliques only matter through the children (Grow/Shrink), so
    /// a factor-free outer region can be narrowed to exactly its children's
    /// cliques, after which it merges or splits away when possible.
    bool dissolve_pass() {
        bool any = false;
        bool changed = true;
        while (changed) {
            changed = false;
            for (RegionId id : g.region_ids()) {
                if (!g.is_outer(id)) continue;
                const Region& r = g.region(id);
                if (!r.factors.empty()) continue;
                auto kids = g.children(id);
                if (kids.empty()) continue;
                std::vector<Clique> desired;
                for (RegionId c : kids) {
                    const auto& dc = g.region(c).cliques;
                    desired.insert(desired.end(), dc.begin(), dc.end());
                }
                desired = maximal_cliques(std::move(desired));
                std::sort(desired.begin(), desired.end());
                if (desired != maximal_cliques(r.cliques)) {
                    int before = total_counting_number(g);
                    std::vector<Clique> to_add, to_remove;
                    for (const auto& c : desired) to_add.push_back(c);
                    g = grow_shrink(g, id, to_add, {});
                    std::vector<Clique> extra;
                    for (const auto& c : g.region(id).cliques)
                        if (!std::binary_search(desired.begin(), desired.end(), c))
                            extra.push_back(c);
                    if (!extra.empty()) g = grow_shrink(g, id, {}, extra);
                    emit(ReductionOp::GrowShrink,
                         "narrowed outer " + std::to_string(id) + " to its children's cliques",
                         before);
                    any = changed = true;
                    break;
                }
                // fuse with a mutually subsuming child when the merge conditions hold
                bool merged = false;
                for (RegionId c : kids) {
                    const Region& d = g.region(c);
                    if (!subsumes(r, d) || !subsumes(d, r)) continue;
                    try {
                        int before = total_counting_number(g);
                        g = merge(g, id, c);
                        emit(ReductionOp::Merge,
                             std::to_string(id) + " into " + std::to_string(c), before);
                        merged = true;
                        break;
                    } catch (const Error&) {
                    }
                }
                if (merged) {
                    any = changed = true;
                    break;
                }
            }
        }
        return any;
    }

    void cleanup(bool dissolve) {
        bool changed = true;
        while (changed) {
            changed = false;
            changed |= prune_nested_pass();
            changed |= duplicate_pass();
            changed |= link_death_pass();
            changed |= drop_pass();
            if (dissolve) changed |= dissolve_pass();
        }
    }

    bool apply_split(RegionId id, const SplitPartition& part, const char* why) {
        int before = total_counting_number(g);
        int c_target = counting_numbers(g).at(id);
        std::ostringstream os;
        os << why << " " << id << " A=" << vars_to_string(g, sorted_vec(part.a))
           << " B=" << vars_to_string(g, sorted_vec(part.b))
           << " S=" << vars_to_string(g, sorted_vec(part.s));
        g = split(g, id, part);
        emit(ReductionOp::Split, os.str(), before, part.s.empty(), c_target);
        return true;
    }

    /// Component, articulation-vertex or clique-separator split of one region,
    /// with separators capped at max_sep variables.
    std::optional<SplitPartition> propose_split(RegionId id, int max_sep) const {
        const Region& r = g.region(id);
        if (r.vars.size() <= 1) return std::nullopt;
        auto adj = adjacency_of(structure_graph(g, id));

        auto try_sep = [&](const std::vector<VarId>& s) -> std::optional<SplitPartition> {
            std::set<VarId> sset(s.begin(), s.end());
            auto comps = components_excluding(r.vars, adj, sset);
            if (comps.size() < 2) return std::nullopt;
            SplitPartition p;
            p.s = s;
            p.a = comps.front();
            for (std::size_t i = 1; i < comps.size(); ++i) p.b = union_of(p.b, comps[i]);
            if (p.a.empty() || p.b.empty()) return std::nullopt;
            if (!check_split(g, id, p)) return p;
            return std::nullopt;
        };

        if (auto p = try_sep({})) return p;
        if (max_sep >= 1)
            for (VarId v : r.vars)
                if (auto p = try_sep({v})) return p;
        for (const auto& k : maximal_cliques(r.cliques)) {
            if (k.vars == r.vars || static_cast<int>(k.vars.size()) > max_sep) continue;
            if (auto p = try_sep(k.vars)) return p;
        }
        // junction-tree separator (subsets of cliques)
        try {
            auto p = find_split(r);
            if (static_cast<int>(p.s.size()) <= max_sep && !check_split(g, id, p)) return p;
        } catch (const Error&) {
        }
        return std::nullopt;
    }
};

} // namespace

ReductionResult reduce_to_ordinary(const RegionGraph& rg, const ReductionObserver& obs) {
    return reduce_to_ordinary(rg, ReduceOptions{}, obs);
}

ReductionResult reduce_to_ordinary(const RegionGraph& rg, const ReduceOptions& opts,
                                   const ReductionObserver& obs) {
    Pipeline pl;
    pl.g = rg;
    std::vector<ReductionStep> trace;
    pl.trace = &trace;
    pl.obs = &obs;

    const int cap = 1000 + 100 * static_cast<int>(rg.n_regions());
    int rounds = 0;
    while (true) {
        if (++rounds > cap) fail("InternalError", "reduce_to_ordinary did not terminate");
        pl.cleanup(/*dissolve=*/true);

        // bottommost incomplete inner region whose children are all complete
        auto depths = pl.g.depths();
        RegionId pick = -1;
        int best_depth = -1;
        for (RegionId id : pl.g.region_ids()) {
            if (pl.g.is_outer(id)) continue;
            const Region& r = pl.g.region(id);
            if (is_complete(r)) continue;
            bool kids_ok = true;
            for (RegionId c : pl.g.children(id))
                if (!is_complete(pl.g.region(c))) {
                    kids_ok = false;
                    break;
                }
            if (!kids_ok) continue;
            if (depths[id] > best_depth) {
                best_depth = depths[id];
                pick = id;
            }
        }
        if (pick >= 0) {
            SplitPartition part;
            try {
                part = find_split(pl.g.region(pick));
            } catch (const Error& e) {
                fail("NonDecomposableInnerRegion",
                     "region " + std::to_string(pick) + ": " + e.what());
            }
            pl.apply_split(pick, part, "split inner");
            continue;
        }

        bool did = false;
        for (RegionId id : pl.g.region_ids()) {
            if (!pl.g.is_outer(id)) continue;
            if (auto part = pl.propose_split(id, opts.max_outer_separator)) {
                pl.apply_split(id, *part, "split outer");
                did = true;
                break;
            }
        }
        if (!did) break;
    }

    for (RegionId id : pl.g.inner_regions())
        if (!is_complete(pl.g.region(id)))
            fail("NonDecomposableInnerRegion",
                 "inner region " + std::to_string(id) + " could not be completed");
    return {std::move(pl.g), std::move(trace)};
}

SingularityVerdict nonsingular_general(const RegionGraph& rg) {
    Pipeline pl;
    pl.g = rg;

    // strip all factors
    for (RegionId id : pl.g.region_ids()) {
        Region& r = pl.g.region_mut(id);
        r.factors.clear();
        std::vector<VarId> vars;
        for (const auto& c : r.cliques) vars = union_of(vars, c.vars);
        r.vars = std::move(vars);
    }
    for (RegionId id : pl.g.region_ids()) {
        if (!pl.g.region(id).vars.empty()) continue;
        auto ps = pl.g.parents(id);
        auto cs = pl.g.children(id);
        pl.g.remove_region(id);
        for (RegionId p : ps)
            for (RegionId c : cs)
                if (!pl.g.has_edge(p, c)) pl.g.add_edge(p, c);
    }

    const int cap = 2000 + 200 * static_cast<int>(rg.n_regions());
    int rounds = 0;
    bool overflow = false;
    while (true) {
        if (++rounds > cap) {
            overflow = true;
            break;
        }
        pl.cleanup(/*dissolve=*/true);

        bool changed = false;

        // isolated regions shrink and split into single-variable regions
        for (RegionId id : pl.g.region_ids()) {
            if (!pl.g.parents(id).empty() || !pl.g.children(id).empty()) continue;
            const Region& r = pl.g.region(id);
            if (r.vars.size() == 1) continue;
            auto vars = r.vars;
            pl.g.remove_region(id);
            for (VarId v : vars) pl.g.add_region({v}, {Clique{{v}}});
            pl.emit(ReductionOp::Split, "isolated region to singletons",
                    total_counting_number(pl.g));
            changed = true;
            break;
        }
        if (changed) continue;

        // split incomplete inner regions along junction separators when possible
        for (RegionId id : pl.g.region_ids()) {
            const Region& r = pl.g.region(id);
            if (r.vars.size() <= 1 || is_complete(r)) continue;
            if (!pl.g.is_outer(id)) {
                bool kids_ok = true;
                for (RegionId c : pl.g.children(id))
                    if (!is_complete(pl.g.region(c))) kids_ok = false;
                if (kids_ok) {
                    try {
                        auto part = find_split(r);
                        if (!check_split(pl.g, id, part)) {
                            pl.apply_split(id, part, "split inner");
                            changed = true;
                            break;
                        }
                    } catch (const Error&) {
                    }
                }
            }
            if (auto part = pl.propose_split(id, std::numeric_limits<int>::max())) {
                pl.apply_split(id, *part, "split");
                changed = true;
                break;
            }
        }
        if (!changed) break;
    }

    SingularityVerdict v;
    bool all_single = true;
    for (const auto& [id, r] : pl.g.regions())
        if (r.vars.size() != 1) all_single = false;
    if (overflow) {
        v.verdict = Verdict::Unknown;
        v.detail = "reduction step limit reached";
        v.residual = pl.g;
        return v;
    }
    if (all_single) {
        v.verdict = Verdict::NonSingular;
        v.detail = "reduced to single-variable regions";
        return v;
    }
    bool inner_complete = true;
    for (RegionId id : pl.g.inner_regions())
        if (!is_complete(pl.g.region(id))) inner_complete = false;
    v.residual = pl.g;
    if (inner_complete) {
        v.verdict = Verdict::Singular;
        v.detail = "irreducible remainder with complete inner regions";
    } else {
        v.verdict = Verdict::Unknown;
        v.detail = "irreducible remainder with structured inner regions";
    }
    return v;
}

SingularityVerdict loop_graph_singular(const RegionGraph& rg) {
    std::vector<RegionId> loops;
    std::map<RegionId, std::vector<std::pair<VarId, VarId>>> loop_edges;
    for (const auto& [id, r] : rg.regions()) {
        auto cl = maximal_cliques(r.cliques);
        if (r.vars.size() == 1) continue; // node region (bias spurs included)
        if (r.vars.size() == 2) {
            if (cl.size() == 1 && cl[0].vars == r.vars) continue; // edge region
            fail("NotALoopGraph", "two-variable region is not a single edge clique");
        }
        // loop region: cliques must be the edges of one simple cycle
        if (cl.size() != r.vars.size()) fail("NotALoopGraph", "region is not a simple loop");
        std::map<VarId, int> deg;
        for (const auto& c : cl) {
            if (c.vars.size() != 2) fail("NotALoopGraph", "loop region has a non-edge clique");
            ++deg[c.vars[0]];
            ++deg[c.vars[1]];
        }
        for (VarId v : r.vars)
            if (deg[v] != 2) fail("NotALoopGraph", "loop region variable degree is not 2");
        std::set<std::pair<VarId, VarId>> es;
        for (const auto& c : cl) es.insert({c.vars[0], c.vars[1]});
        auto comps = components_excluding(r.vars, adjacency_of(es), {});
        if (comps.size() != 1) fail("NotALoopGraph", "loop region is disconnected");
        loops.push_back(id);
        for (const auto& c : cl) loop_edges[id].push_back({c.vars[0], c.vars[1]});
    }

    std::map<std::pair<VarId, VarId>, int> use;
    std::set<RegionId> active(loops.begin(), loops.end());
    for (RegionId l : loops)
        for (const auto& e : loop_edges[l]) ++use[e];
    bool changed = true;
    while (changed) {
        changed = false;
        for (RegionId l : active) {
            bool priv = false;
            for (const auto& e : loop_edges[l])
                if (use[e] == 1) {
                    priv = true;
                    break;
                }
            if (priv) {
                for (const auto& e : loop_edges[l]) --use[e];
                active.erase(l);
                changed = true;
                break;
            }
        }
    }

    SingularityVerdict v;
    if (active.empty()) {
        v.verdict = Verdict::NonSingular;
        v.detail = "all loops peeled";
    } else {
        v.verdict = Verdict::Singular;
        v.witness_loops.assign(active.begin(), active.end());
        v.detail = "every remaining loop shares all of its edges";
    }
    return v;
}

bool cycle_space_dependent(const std::vector<std::vector<VarId>>& loops,
                           const std::vector<std::pair<VarId, VarId>>& base_edges) {
    std::map<std::pair<VarId, VarId>, std::size_t> index;
    for (const auto& e : base_edges) {
        auto key = std::minmax(e.first, e.second);
        index.emplace(std::make_pair(key.first, key.second), index.size());
    }
    const std::size_t words = (index.size() + 63) / 64;

    auto lowest_bit = [&](const std::vector<std::uint64_t>& row) -> std::size_t {
        for (std::size_t w = 0; w < words; ++w)
            if (row[w]) return w * 64 + static_cast<std::size_t>(__builtin_ctzll(row[w]));
        return words * 64; // zero row
    };

    std::map<std::size_t, std::vector<std::uint64_t>> pivots; // pivot bit -> reduced row
    for (const auto& loop : loops) {
        if (loop.size() < 3) fail("NotACycle", "loop shorter than 3");
        std::set<VarId> distinct(loop.begin(), loop.end());
        if (distinct.size() != loop.size()) fail("NotACycle", "loop revisits a variable");
        std::vector<std::uint64_t> row(words, 0);
        for (std::size_t i = 0; i < loop.size(); ++i) {
            VarId u = loop[i], w = loop[(i + 1) % loop.size()];
            auto key = std::minmax(u, w);
            auto it = index.find(std::make_pair(key.first, key.second));
            if (it == index.end()) fail("NotACycle", "loop uses a non-edge of the base graph");
            row[it->second / 64] ^= (std::uint64_t(1) << (it->second % 64));
        }
        while (true) {
            std::size_t lead = lowest_bit(row);
            if (lead == words * 64) return true; // reduced to zero: dependent
            auto it = pivots.find(lead);
            if (it == pivots.end()) {
                pivots.emplace(lead, std::move(row));
                break;
            }
            for (std::size_t w = 0; w < words; ++w) row[w] ^= it->second[w];
        }
    }
    return false;
}

} // namespace srg

#include "srg/pursuit.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace srg {

std::vector<Triangle> candidate_triangles(const FactorGraph& fg) {
    if (!fg.is_pairwise()) fail("NotPairwise", "candidate_triangles: model must be pairwise");
    auto edges = fg.pairwise_edges();
    std::set<std::pair<VarId, VarId>> es(edges.begin(), edges.end());
    auto adjacent = [&](VarId a, VarId b) {
        auto [x, y] = std::minmax(a, b);
        return es.count({x, y}) != 0;
    };
    std::vector<Triangle> out;
    const int n = fg.n_vars();
    for (VarId i = 0; i < n; ++i)
        for (VarId j = i + 1; j < n; ++j) {
            if (!adjacent(i, j)) continue;
            for (VarId k = j + 1; k < n; ++k)
                if (adjacent(i, k) && adjacent(j, k)) out.push_back({i, j, k});
        }
    return out;
}

namespace {

RegionId region_with_vars(const RegionGraph& rg, const std::vector<VarId>& vars,
                          std::size_t max_size) {
    for (const auto& [id, r] : rg.regions())
        if (r.vars == vars && r.vars.size() <= max_size) return id;
    fail("InvalidRegionGraph", "no region over the requested variables");
}

double entropy_sum(const Table& q) { return plogp_sum(q); }

double score_impl(const RegionGraph& rg, const BeliefSet& beliefs, const Triangle& t) {
    Triangle tri = t;
    std::sort(tri.begin(), tri.end());
    std::vector<VarId> vs{tri[0], tri[1], tri[2]};
    std::array<std::vector<VarId>, 3> edges{{{tri[0], tri[1]}, {tri[0], tri[2]}, {tri[1], tri[2]}}};

    // approximate junction of the three edge beliefs over the node beliefs
    const Table& q0 = beliefs.q.at(region_with_vars(rg, edges[0], 2));
    std::vector<int> cards{q0.card_of(tri[0]), q0.card_of(tri[1]), 0};
    Table qe2 = beliefs.q.at(region_with_vars(rg, edges[2], 2));
    cards[2] = qe2.card_of(tri[2]);
    Table log_tri(vs, cards, 0.0);
    double s_edges = 0.0, s_nodes = 0.0;
    for (const auto& e : edges) {
        const Table& qe = beliefs.q.at(region_with_vars(rg, e, 2));
        add_projected(log_tri, log_floored(qe));
        s_edges += entropy_sum(qe);
    }
    for (VarId v : vs) {
        const Table& qv = beliefs.q.at(region_with_vars(rg, {v}, 1));
        subtract_projected(log_tri, log_floored(qv));
        s_nodes += entropy_sum(qv);
    }
    Table q_tri = exp_normalized(log_tri);

    // counting changes: triangle +1, each edge -1, each node +1
    double delta = entropy_sum(q_tri) - s_edges + s_nodes;
    return std::abs(delta);
}

} // namespace

double delta_f_score(const RegionGraph& rg, const GbpResult& state, const Triangle& t) {
    if (!state.converged) fail("NotConverged", "delta_f_score needs a converged state");
    return score_impl(rg, state.beliefs, t);
}

PursuitTrace region_pursuit(const FactorGraph& fg, const PursuitConfig& cfg) {
    if (cfg.max_triangles < 0) fail("InvalidConfig", "max_triangles must be >= 0");
    auto all = candidate_triangles(fg);
    std::set<Triangle> remaining(all.begin(), all.end());
    if (cfg.mode == PursuitMode::fixed_order)
        for (const auto& t : cfg.fixed_sequence)
            if (!remaining.count(t))
                fail("InvalidConfig", "fixed sequence contains a non-candidate triangle");

    auto oracle = exact_inference(fg);

    PursuitTrace trace;
    std::vector<std::vector<VarId>> loops;
    RegionGraph rg = loop_graph(fg, LoopSpec{loops});
    GbpResult state = run_gbp(rg, fg, cfg.gbp);
    auto record = [&](const Triangle& t, bool accepted, double score) {
        PursuitStep st;
        st.triangle = t;
        st.accepted = accepted;
        st.score = score;
        st.max_marginal_error = max_marginal_error(node_marginals(rg, state.beliefs), oracle);
        st.free_energy = state.free_energy;
        st.iterations = state.iterations;
        st.converged = state.converged;
        return st;
    };
    trace.baseline = record({-1, -1, -1}, false, 0.0);

    std::size_t fixed_pos = 0;
    while (static_cast<int>(trace.accepted.size()) < cfg.max_triangles && !remaining.empty()) {
        Triangle pick{-1, -1, -1};
        double pick_score = 0.0;
        if (cfg.mode == PursuitMode::fixed_order) {
            while (fixed_pos < cfg.fixed_sequence.size() &&
                   !remaining.count(cfg.fixed_sequence[fixed_pos]))
                ++fixed_pos;
            if (fixed_pos >= cfg.fixed_sequence.size()) break;
            pick = cfg.fixed_sequence[fixed_pos];
            pick_score = score_impl(rg, state.beliefs, pick);
        } else {
            bool first = true;
            for (const auto& t : remaining) {
                double s = score_impl(rg, state.beliefs, t);
                bool better = cfg.mode == PursuitMode::best ? s > pick_score : s < pick_score;
                if (first || better) { // ties keep the lexicographically first triple
                    pick = t;
                    pick_score = s;
                    first = false;
                }
            }
        }

        if (cfg.constrain_nonsingular) {
            auto trial_loops = loops;
            trial_loops.push_back({pick[0], pick[1], pick[2]});
            RegionGraph trial = loop_graph(fg, LoopSpec{trial_loops});
            if (loop_graph_singular(trial).verdict == Verdict::Singular) {
                trace.steps.push_back(record(pick, false, pick_score));
                remaining.erase(pick);
                continue;
            }
        }

        loops.push_back({pick[0], pick[1], pick[2]});
        remaining.erase(pick);
        rg = loop_graph(fg, LoopSpec{loops});
        state = run_gbp(rg, fg, cfg.gbp);
        trace.accepted.push_back(pick);
        trace.steps.push_back(record(pick, true, pick_score));
    }
    trace.final_graph = rg;
    return trace;
}

} // namespace srg

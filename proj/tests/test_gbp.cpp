#include <doctest.h>

#include "srg/constructions.hpp"
#include "srg/gbp.hpp"
#include "support.hpp"

using namespace srg;

TEST_CASE("Bethe GBP is exact on trees") {
    for (std::uint64_t seed : {1, 2, 3}) {
        FactorGraph fg = testsupport::random_tree_model(8, seed);
        auto rg = bethe(fg);
        GbpConfig cfg;
        cfg.tolerance = 1e-12;
        auto res = run_gbp(rg, fg, cfg);
        REQUIRE(res.converged);
        auto oracle = exact_inference(fg);
        CHECK(max_marginal_error(node_marginals(rg, res.beliefs), oracle) < 1e-9);
        CHECK(res.free_energy == doctest::Approx(-oracle.log_partition).epsilon(1e-9));
    }
}

TEST_CASE("uniform factors give uniform beliefs on a non-singular graph") {
    FactorGraph fg = testsupport::uniform_complete_model(6);
    auto rg = star_rg(fg, 1);
    GbpConfig cfg;
    cfg.init_seed = 4;
    auto res = run_gbp(rg, fg, cfg);
    REQUIRE(res.converged);
    for (const auto& [id, q] : res.beliefs.q)
        CHECK((q.values() - 1.0 / static_cast<double>(q.size())).abs().maxCoeff() < 1e-8);
}

TEST_CASE("free energy of a single uniform region is -log K") {
    FactorGraph fg = FactorGraph::make(
        {{"a", 2}, {"b", 2}}, {{"f", {0, 1}, Table({0, 1}, {2, 2}, 1.0)}});
    auto rg = cluster_variation(fg, {{0, 1}});
    BeliefSet bs;
    bs.q[rg.region_ids().front()] = Table({0, 1}, {2, 2}, 0.25);
    CHECK(free_energy(rg, fg, bs) == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("free energy shape mismatch is rejected") {
    FactorGraph fg = testsupport::random_tree_model(3, 5);
    auto rg = bethe(fg);
    BeliefSet bs;
    CHECK_THROWS_AS(free_energy(rg, fg, bs), Error);
}

TEST_CASE("constraint residual") {
    FactorGraph fg = testsupport::random_tree_model(4, 9);
    auto rg = bethe(fg);
    auto oracle = exact_inference(fg);

    // beliefs copied from the exact joint marginalization are consistent
    BeliefSet bs;
    // exact joint over 16 states
    Table joint({0, 1, 2, 3}, fg.cards_of({0, 1, 2, 3}), 1.0);
    std::vector<int> st(4);
    for (Index i = 0; i < joint.size(); ++i) {
        joint.state_of(i, st);
        double w = 1.0;
        for (const auto& f : fg.factors()) {
            std::vector<int> sub;
            for (VarId v : f.scope) sub.push_back(st[static_cast<std::size_t>(v)]);
            w *= f.table[f.table.index_of(sub)];
        }
        joint[i] = w;
    }
    normalize_in_place(joint);
    for (const auto& [id, r] : rg.regions()) bs.q[id] = marginalize(joint, r.vars);
    CHECK(constraint_residual(rg, bs) < 1e-14);

    // independent uniform beliefs are consistent too
    BeliefSet uni;
    for (const auto& [id, r] : rg.regions()) {
        Table q(r.vars, fg.cards_of(r.vars), 1.0);
        normalize_in_place(q);
        uni.q[id] = q;
    }
    CHECK(constraint_residual(rg, uni) == doctest::Approx(0.0));

    // a hand-computed two-region case
    RegionGraph g2;
    RegionId p = g2.add_region({0, 1}, {Clique{{0, 1}}});
    RegionId c = g2.add_region({0}, {Clique{{0}}});
    g2.add_edge(p, c);
    BeliefSet two;
    Table qp({0, 1}, {2, 2});
    qp[0] = 0.4;
    qp[1] = 0.1;
    qp[2] = 0.2;
    qp[3] = 0.3; // marginal on x0: (0.5, 0.5)
    Table qc({0}, {2});
    qc[0] = 0.8;
    qc[1] = 0.2;
    two.q[p] = qp;
    two.q[c] = qc;
    CHECK(constraint_residual(g2, two) == doctest::Approx(0.3));
}

TEST_CASE("node marginals: disagreement bounded by the constraint residual") {
    FactorGraph fg = random_complete_model(5, 3, PotentialStyle::uniform_small);
    auto rg = bethe(fg);
    auto res = run_gbp(rg, fg, {});
    REQUIRE(res.converged);
    auto marg = node_marginals(rg, res.beliefs);
    for (const auto& [id, r] : rg.regions())
        for (VarId v : r.vars) {
            Table m = marginalize(res.beliefs.q.at(id), {v});
            CHECK((m.values() - marg.at(v)).abs().maxCoeff() <=
                  res.max_constraint_residual * static_cast<double>(rg.n_regions()) + 1e-12);
        }
}

TEST_CASE("converged results satisfy the residual contract") {
    FactorGraph fg = random_complete_model(6, 8, PotentialStyle::uniform_small);
    auto rg = star_rg(fg, 2);
    GbpConfig cfg;
    auto res = run_gbp(rg, fg, cfg);
    REQUIRE(res.converged);
    CHECK(res.max_constraint_residual <= 10 * cfg.tolerance);
    for (const auto& [id, q] : res.beliefs.q) {
        CHECK(q.values().sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((q.values() >= 0).all());
    }
}

TEST_CASE("damping invariance of fixed points") {
    FactorGraph fg = random_complete_model(5, 6, PotentialStyle::uniform_small);
    auto rg = star_rg(fg, 1);
    GbpEngine eng(rg, fg);
    GbpConfig cfg;
    auto res = eng.run(cfg);
    REQUIRE(res.converged);
    for (double d : {0.3, 0.7}) {
        GbpConfig redo;
        redo.damping = d;
        redo.auto_damping = false;
        redo.max_iters = 1;
        auto stay = eng.run(redo, res.messages);
        CHECK(stay.final_delta < cfg.tolerance * 10);
    }
}

TEST_CASE("scaling one factor shifts the free energy by its counting weight") {
    FactorGraph fg = random_complete_model(4, 13, PotentialStyle::uniform_small);
    auto rg = bethe(fg);
    auto res = run_gbp(rg, fg, {});
    REQUIRE(res.converged);

    const double c = 2.7;
    std::vector<Factor> fs(fg.factors().begin(), fg.factors().end());
    fs[0].table.values() *= c;
    FactorGraph scaled =
        FactorGraph::make({fg.variables().begin(), fg.variables().end()}, std::move(fs));
    // at fixed beliefs: F changes by -c_R log c for the region holding the factor
    RegionId holder = -1;
    for (const auto& [id, r] : rg.regions())
        for (FactorId f : r.factors)
            if (f == 0) holder = id;
    int cr = counting_numbers(rg).at(holder);
    double f_before = free_energy(rg, fg, res.beliefs);
    double f_after = free_energy(rg, scaled, res.beliefs);
    CHECK(f_after - f_before == doctest::Approx(-cr * std::log(c)).epsilon(1e-9));

    // converged marginals are unchanged
    auto res2 = run_gbp(rg, scaled, {});
    REQUIRE(res2.converged);
    auto ma = node_marginals(rg, res.beliefs);
    auto mb = node_marginals(rg, res2.beliefs);
    for (const auto& [v, m] : ma) CHECK((m - mb.at(v)).abs().maxCoeff() < 1e-8);
}

TEST_CASE("GBP on the Bethe graph reproduces textbook loopy BP") {
    FactorGraph fg = random_complete_model(5, 17, PotentialStyle::uniform_small);
    auto rg = bethe(fg);
    GbpConfig cfg;
    cfg.tolerance = 1e-13;
    auto res = run_gbp(rg, fg, cfg);
    REQUIRE(res.converged);
    auto lp = testsupport::loopy_bp(fg, 0.3, 20000, 1e-14);
    REQUIRE(lp.converged);
    auto marg = node_marginals(rg, res.beliefs);
    for (int v = 0; v < fg.n_vars(); ++v)
        for (int s = 0; s < 2; ++s)
            CHECK(std::abs(marg.at(v)[s] -
                           lp.marginals[static_cast<std::size_t>(v)][static_cast<std::size_t>(s)]) <
                  1e-9);
}

TEST_CASE("random schedule reaches the same fixed point") {
    FactorGraph fg = random_complete_model(5, 19, PotentialStyle::uniform_small);
    auto rg = star_rg(fg, 1);
    auto a = run_gbp(rg, fg, {});
    GbpConfig cfg;
    cfg.schedule = Schedule::random_permutation;
    cfg.seed = 99;
    auto b = run_gbp(rg, fg, cfg);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    auto ma = node_marginals(rg, a.beliefs);
    auto mb = node_marginals(rg, b.beliefs);
    for (const auto& [v, m] : ma) CHECK((m - mb.at(v)).abs().maxCoeff() < 1e-7);
}

TEST_CASE("engine rejects bad inputs") {
    FactorGraph fg = grid_model(2, 4, 3);
    auto ep = ep_graph(fg, ep_factorized_spec(fg)); // inner region is not complete
    CHECK_THROWS_AS(run_gbp(ep, fg, {}), Error);

    auto rg = bethe(fg);
    GbpConfig bad;
    bad.tolerance = 0.0;
    CHECK_THROWS_AS(run_gbp(rg, fg, bad), Error);
    bad.tolerance = 1e-9;
    bad.damping = 1.0;
    CHECK_THROWS_AS(run_gbp(rg, fg, bad), Error);
}

TEST_CASE("non-convergence is flagged, never thrown") {
    FactorGraph fg = random_complete_model(6, 23, PotentialStyle::minka_qi);
    auto rg = star_rg(fg, 1);
    GbpConfig cfg;
    cfg.max_iters = 3;
    auto res = run_gbp(rg, fg, cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 3);
    for (const auto& [id, q] : res.beliefs.q)
        CHECK(q.values().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

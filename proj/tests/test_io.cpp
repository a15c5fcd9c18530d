#include <doctest.h>

#include <sstream>

#include "srg/constructions.hpp"
#include "srg/gbp.hpp"
#include "srg/io.hpp"
#include "support.hpp"

using namespace srg;

TEST_CASE("model round trip is bit exact") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        FactorGraph fg = random_complete_model(5, seed, PotentialStyle::gaussian);
        std::string text = write_model(fg);
        std::istringstream in(text);
        FactorGraph back = read_model(in);
        CHECK(write_model(back) == text);
        REQUIRE(back.n_factors() == fg.n_factors());
        for (int f = 0; f < fg.n_factors(); ++f)
            CHECK((back.factor(f).table.values() == fg.factor(f).table.values()).all());
    }
}

TEST_CASE("model parse errors") {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return read_model(in);
    };
    CHECK_THROWS_AS(parse("nonsense"), Error);
    CHECK_THROWS_AS(parse("srg-model\nvar a 2\nfactor f 1 b 1 1\nend"), Error); // unknown var
    CHECK_THROWS_AS(parse("srg-model\nvar a 2\nvar b 2\nfactor f 2 b a 1 1 1 1\nend"),
                    Error); // scope out of declaration order
    CHECK_THROWS_AS(parse("srg-model\nvar a 2\nfactor f 1 a 1\nend"), Error); // missing value
}

TEST_CASE("region graph round trip") {
    FactorGraph fg = random_complete_model(5, 7, PotentialStyle::uniform_small);
    auto rg = star_rg(fg, 1);
    std::string text = write_region_graph(rg);

    // standalone read: isomorphic reconstruction
    std::istringstream in(text);
    RegionGraph back = read_region_graph(in);
    CHECK(isomorphic(back, rg));
    CHECK(write_region_graph(back) == text);

    // with the model: exact ids, usable for inference
    std::istringstream in2(text);
    RegionGraph with_model = read_region_graph(in2, &fg);
    CHECK(isomorphic(with_model, rg));
    auto a = run_gbp(rg, fg, {});
    auto b = run_gbp(with_model, fg, {});
    auto ma = node_marginals(rg, a.beliefs);
    auto mb = node_marginals(with_model, b.beliefs);
    for (const auto& [v, m] : ma) CHECK((m - mb.at(v)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("region graph parse errors") {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return read_region_graph(in);
    };
    CHECK_THROWS_AS(parse("srg-model"), Error);
    CHECK_THROWS_AS(parse("srg-regiongraph\nvars 1 a\nfactorscopes 0\nregion r0\nvars 1 b\n"
                          "cliques 0\nfactors 0\nedges 0\nend"),
                    Error); // undeclared variable
}

TEST_CASE("dot export mentions every region and edge") {
    FactorGraph fg = grid_model(2, 2, 1);
    auto rg = bethe(fg);
    std::string dot = to_dot(rg);
    CHECK(dot.find("digraph") != std::string::npos);
    for (const auto& [id, r] : rg.regions())
        CHECK(dot.find("r" + std::to_string(id) + " ") != std::string::npos);
    std::size_t arrows = 0, pos = 0;
    while ((pos = dot.find("->", pos)) != std::string::npos) {
        ++arrows;
        pos += 2;
    }
    CHECK(arrows == rg.edges().size());
}

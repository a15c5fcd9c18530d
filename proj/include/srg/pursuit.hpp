#pragma once

#include <array>

#include "srg/constructions.hpp"
#include "srg/gbp.hpp"
#include "srg/reductions.hpp"

namespace srg {

using Triangle = std::array<VarId, 3>; // sorted

enum class PursuitMode { best, worst, fixed_order };

struct PursuitConfig {
    int max_triangles = std::numeric_limits<int>::max();
    PursuitMode mode = PursuitMode::best;
    bool constrain_nonsingular = false;
    GbpConfig gbp;
    std::uint64_t seed = 0;
    std::vector<Triangle> fixed_sequence; // consumed in order by fixed_order mode
};

struct PursuitStep {
    Triangle triangle{-1, -1, -1};
    bool accepted = false;
    double score = 0.0;
    double max_marginal_error = 0.0;
    double free_energy = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct PursuitTrace {
    PursuitStep baseline; // metrics of the loop-free (Bethe) starting point
    std::vector<PursuitStep> steps;
    std::vector<Triangle> accepted;
    RegionGraph final_graph;
};

/// All variable triples forming triangles of the model graph.
std::vector<Triangle> candidate_triangles(const FactorGraph& fg);

/// Estimated |delta F| of adding a triangle at the current fixed point: the
/// change of the counting-weighted entropy terms with the triangle belief
/// assembled from the three edge beliefs divided by the node beliefs.
double delta_f_score(const RegionGraph& rg, const GbpResult& state, const Triangle& t);

/// Greedy region pursuit over triangles on top of the Bethe loop-graph.
PursuitTrace region_pursuit(const FactorGraph& fg, const PursuitConfig& cfg);

} // namespace srg

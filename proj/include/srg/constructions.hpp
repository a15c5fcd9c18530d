#pragma once

#include "srg/factor_graph.hpp"
#include "srg/region_graph.hpp"

namespace srg {

/// Cycles of the model graph to use as loop regions.
struct LoopSpec {
    std::vector<std::vector<VarId>> loops; // ordered vertex sequences, length >= 3
};

struct EpOuterSpec {
    std::vector<Clique> extra_cliques; // cliques added on top of the base
    std::vector<FactorId> factors;     // factors assigned to this outer region
};

/// Two-layer SRG: outer regions sharing one inner base region.
struct EpGraphSpec {
    std::vector<Clique> base_cliques;
    std::vector<EpOuterSpec> outers;
};

/// One outer region per factor, one inner region per variable.
RegionGraph bethe(const FactorGraph& fg);

/// Closes the clusters under pairwise intersection, builds the Hasse diagram
/// of containment, makes every region complete, and assigns each factor to the
/// first covering outer cluster.
RegionGraph cluster_variation(const FactorGraph& fg,
                              const std::vector<std::vector<VarId>>& outer_clusters);

/// The width-w star clusters: roots plus each factor edge outside the root
/// set, with root-touching edges absorbed into covering clusters.
std::vector<std::vector<VarId>> star_clusters(const FactorGraph& fg, int width,
                                              const std::vector<VarId>& node_order = {});

/// Star region graph: cluster variation closure of the star clusters.
RegionGraph star_rg(const FactorGraph& fg, int width, const std::vector<VarId>& node_order = {});

/// Overlapping boxes on a grid model, adjacent boxes sharing a full side.
RegionGraph grid_boxes(const FactorGraph& fg, int grid_rows, int grid_cols, int box_rows,
                       int box_cols);

/// Three-layer loop/edge/node region graph over a pairwise model. Unary
/// factors are placed on their own single-variable outer regions so that the
/// loop-free case coincides with the Bethe construction.
RegionGraph loop_graph(const FactorGraph& fg, const LoopSpec& spec,
                       const std::vector<std::pair<VarId, VarId>>& extra_edges = {});

/// Two-layer EP construction from an explicit specification.
RegionGraph ep_graph(const FactorGraph& fg, const EpGraphSpec& spec);

/// The unit squares of a grid as loops.
LoopSpec grid_faces(int rows, int cols);

// Canned EP specifications used by the experiments (and handy for tests):

/// Fully factorized base; one outer region per pairwise factor adding that
/// single edge.
EpGraphSpec ep_factorized_spec(const FactorGraph& fg);

/// Comb spanning tree base on a grid (all row edges plus the first column);
/// one outer region per horizontal band adding the band's rungs, factors
/// assigned to the band whose ladder contains them.
EpGraphSpec ep_grid_tree_spec(const FactorGraph& fg, int rows, int cols);

/// Star base with two loop outer regions on the 2x3 complete bipartite model.
EpGraphSpec ep_k23_spec(const FactorGraph& fg);

} // namespace srg

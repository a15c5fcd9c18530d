#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srg/region_graph.hpp"

namespace srg {

enum class ReductionOp { LinkDeath, GrowShrink, Drop, FactorMove, Merge, Split, DuplicateMerge };

std::string to_string(ReductionOp op);

/// One applied rewrite, with the observed effect on the total counting number.
struct ReductionStep {
    ReductionOp op;
    std::string detail;
    int total_before = 0;
    int total_after = 0;
    bool empty_separator = false; // Split only
    int target_counting = 0;      // Split only: c_R of the region split
};

using ReductionObserver = std::function<void(const ReductionStep&, const RegionGraph& after)>;

// ---- the rewrite operators (pure: each returns a new graph) ----

/// Deletes parent->child when the child stays reachable on another directed
/// path, or when the loop-closing shared-ancestor conditions hold.
RegionGraph link_death(const RegionGraph& rg, RegionId parent, RegionId child);

/// Adds and/or removes cliques of an outer region. Removal requires that no
/// child clique depended on the removed clique alone; variables left uncovered
/// are dropped from the region.
RegionGraph grow_shrink(const RegionGraph& rg, RegionId region,
                        const std::vector<Clique>& add_cliques,
                        const std::vector<Clique>& remove_cliques);

/// Removes a region with a unique parent, linking the parent to its children.
RegionGraph drop(const RegionGraph& rg, RegionId region);

/// Moves a factor between two outer regions sharing a child whose clique
/// covers the factor scope.
RegionGraph factor_move(const RegionGraph& rg, FactorId factor, RegionId from, RegionId to);

/// Fuses a factor-free parent with a mutually subsuming child.
RegionGraph merge(const RegionGraph& rg, RegionId parent, RegionId child);

struct SplitPartition {
    std::vector<VarId> a, b, s;
};

/// Replaces a region by the induced subregions on A+S, B+S and S.
RegionGraph split(const RegionGraph& rg, RegionId region, const SplitPartition& part);

/// Fuses regions with identical variables, cliques and factor sets until no
/// duplicates remain. Idempotent.
RegionGraph duplicate_merge(const RegionGraph& rg);
RegionGraph duplicate_merge(const RegionGraph& rg, const ReductionObserver& obs);

/// Junction-tree separator split for a decomposable, incomplete clique set.
SplitPartition find_split(const Region& r);

struct ReductionResult {
    RegionGraph graph;
    std::vector<ReductionStep> trace;
};

struct ReduceOptions {
    /// Largest separator used when decomposing outer regions. 0 splits only
    /// disconnected outer regions, 1 adds articulation vertices, larger values
    /// allow clique and junction-tree separators. Inner regions always reduce
    /// fully; the output is ordinary either way.
    int max_outer_separator = std::numeric_limits<int>::max();
};

/// Reduces an SRG with decomposable inner regions to an ordinary region graph
/// (all inner regions complete), interleaving canonical cleanup. The fixed
/// points of the result coincide with those of the input.
ReductionResult reduce_to_ordinary(const RegionGraph& rg, const ReductionObserver& obs = {});
ReductionResult reduce_to_ordinary(const RegionGraph& rg, const ReduceOptions& opts,
                                   const ReductionObserver& obs = {});

enum class Verdict { NonSingular, Singular, Unknown };

std::string to_string(Verdict v);

struct SingularityVerdict {
    Verdict verdict = Verdict::Unknown;
    std::optional<RegionGraph> residual;  // irreducible factor-free remainder
    std::vector<RegionId> witness_loops;  // loop peeling: the stuck subset
    std::string detail;
};

/// Strips factors and applies the reduction rules exhaustively. NonSingular
/// when only single-variable regions remain; Singular when stuck with complete
/// inner regions; Unknown otherwise.
SingularityVerdict nonsingular_general(const RegionGraph& rg);

/// Loop peeling for three-layer loop/edge/node graphs: iteratively removes any
/// loop owning an edge no other remaining loop uses.
SingularityVerdict loop_graph_singular(const RegionGraph& rg);

/// GF(2) linear dependence of the loops' edge-incidence vectors over the base
/// graph's edges. Dependence implies singularity of the loop-graph.
bool cycle_space_dependent(const std::vector<std::vector<VarId>>& loops,
                           const std::vector<std::pair<VarId, VarId>>& base_edges);

} // namespace srg

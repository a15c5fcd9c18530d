#pragma once

#include <string>
#include <vector>

#include "srg/gbp.hpp"
#include "srg/pursuit.hpp"

namespace srg {

enum class ExperimentName {
    table1_complete,
    table1_bipartite,
    grid_boxes_sweep,
    pursuit_fig6,
    convergence_fig7,
    reduction_equivalence,
};

ExperimentName experiment_by_name(const std::string& name);
std::string to_string(ExperimentName name);

struct ExperimentSpec {
    ExperimentName name = ExperimentName::table1_complete;
    int trials = 20;
    std::uint64_t seed = 0;
    std::string output_path; // empty: no file written
    GbpConfig gbp;           // base inference configuration
    int max_triangles = -1;  // pursuit experiments; -1 keeps the experiment default
    int jobs = 1;            // concurrent trials
};

/// Tabular result: header plus per-trial rows followed by aggregate rows
/// (trial column "mean", arithmetic mean of the trial rows). The last column
/// is always wall_time_ms, the only nondeterministic one.
struct ExperimentResult {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const;
    /// Value of `column` in the aggregate row whose `key_column` equals `key`.
    double aggregate(const std::string& key_column, const std::string& key,
                     const std::string& column) const;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// The loop-level reduction of the K23 EP-graph: outer regions split only at
/// components and articulation vertices, leaving the two loop regions over the
/// shared phantom-edge child.
RegionGraph reduce_k23_to_loops(const RegionGraph& ep);

/// The star clusters plus the extra outer region over order positions
/// 2..w+3 (the singular variant studied alongside the clean stars).
RegionGraph star_rg_plus_extra(const FactorGraph& fg, int width,
                               const std::vector<VarId>& node_order = {});

} // namespace srg

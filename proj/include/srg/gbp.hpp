#pragma once

#include <map>
#include <optional>

#include "srg/factor_graph.hpp"
#include "srg/region_graph.hpp"

namespace srg {

enum class Schedule { sequential_topological, random_permutation };

struct GbpConfig {
    double damping = 0.5;   // geometric sweep-level interpolation of log-messages, in [0,1)
    int max_iters = 3000;
    double tolerance = 1e-9; // max absolute proposed change of any log-message entry per sweep
    Schedule schedule = Schedule::sequential_topological;
    std::uint64_t seed = 0;                 // drives the random_permutation schedule
    std::optional<std::uint64_t> init_seed; // when set, messages start at random values
    bool auto_damping = true; // escalate 0.5 -> 0.7 -> 0.9 -> 0.95 -> 0.98 on oscillation
};

/// One log-domain multiplier table per (parent, child) edge; ordinary region
/// graphs have a single clique per inner region, so the edge identifies the
/// constraint.
struct MessageSet {
    std::vector<std::pair<RegionId, RegionId>> edges;
    std::vector<Table> log_messages;
};

struct BeliefSet {
    std::map<RegionId, Table> q; // normalized linear-domain tables
};

struct GbpResult {
    BeliefSet beliefs;
    bool converged = false;
    int iterations = 0;
    double free_energy = 0.0;
    double max_constraint_residual = 0.0;
    double final_delta = 0.0;
    double damping_used = 0.0;
    MessageSet messages;
};

/// Damped parent-to-child GBP on an ordinary region graph (every inner region
/// complete). Each message update matches the parent's marginal on the child
/// clique to the child's belief; all arithmetic is in the log domain. A single
/// run is sequential; independent runs over the same graphs may proceed
/// concurrently.
class GbpEngine {
public:
    GbpEngine(const RegionGraph& rg, const FactorGraph& fg);

    GbpResult run(const GbpConfig& cfg) const;
    GbpResult run(const GbpConfig& cfg, const MessageSet& initial) const;

    const RegionGraph& graph() const { return *rg_; }

private:
    struct EdgeInfo {
        RegionId parent, child;
        std::size_t parent_idx, child_idx;
    };

    BeliefSet beliefs_from(const std::vector<Table>& logm) const;
    Table log_belief(std::size_t region_idx, const std::vector<Table>& logm) const;

    const RegionGraph* rg_;
    const FactorGraph* fg_;
    std::vector<RegionId> rids_;
    std::map<RegionId, std::size_t> ridx_;
    std::vector<Table> log_f_;                      // per region: assigned log factors
    std::vector<EdgeInfo> edges_;                   // sequential-topological order
    std::vector<std::vector<std::size_t>> msgs_of_; // M(R): message indices per region
    std::vector<std::vector<std::vector<Index>>> msg_proj_; // region table <- message table
    std::vector<std::vector<Index>> marg_proj_;             // parent table -> child table
};

GbpResult run_gbp(const RegionGraph& rg, const FactorGraph& fg, const GbpConfig& cfg = {});

/// Kikuchi free energy: sum over regions of c_R * sum_x q_R (log q_R - log f_R),
/// with 0 log 0 = 0 and factor values floored at 1e-300.
double free_energy(const RegionGraph& rg, const FactorGraph& fg, const BeliefSet& beliefs);

/// Max over (parent, child, child clique) of the L-infinity difference between
/// the two regions' marginals on that clique.
double constraint_residual(const RegionGraph& rg, const BeliefSet& beliefs);

/// Per-variable marginals read from the lowest region containing the variable
/// (greatest depth, ties to the smallest region id).
std::map<VarId, Eigen::ArrayXd> node_marginals(const RegionGraph& rg, const BeliefSet& beliefs);

/// Max over variables and states of |marginal - exact marginal|.
double max_marginal_error(const std::map<VarId, Eigen::ArrayXd>& marginals,
                          const ExactResult& exact);

} // namespace srg

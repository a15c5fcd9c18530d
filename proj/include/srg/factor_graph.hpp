#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "srg/table.hpp"

namespace srg {

struct VariableDecl {
    std::string name;
    int cardinality = 2;
};

struct Factor {
    std::string name;
    std::vector<VarId> scope; // strictly increasing variable indices
    Table table;              // linear domain, nonnegative, at least one positive entry
};

/// Discrete factorized model: p(x) proportional to the product of factor tables.
/// Immutable after make(); safe to share across concurrent trials.
class FactorGraph {
public:
    /// Validates all invariants (scope bounds, table shapes, nonnegativity,
    /// connectedness of the variable-factor graph) and canonicalizes nothing.
    static FactorGraph make(std::vector<VariableDecl> vars, std::vector<Factor> factors);

    int n_vars() const { return static_cast<int>(vars_.size()); }
    int cardinality(VarId v) const { return vars_[static_cast<std::size_t>(v)].cardinality; }
    const std::vector<VariableDecl>& variables() const { return vars_; }
    const std::vector<Factor>& factors() const { return factors_; }
    const Factor& factor(FactorId f) const { return factors_[static_cast<std::size_t>(f)]; }
    int n_factors() const { return static_cast<int>(factors_.size()); }

    /// Index of a variable by name; -1 when absent.
    int var_index(const std::string& name) const;
    int factor_index(const std::string& name) const;

    /// True when every factor has arity <= 2.
    bool is_pairwise() const;

    /// Distinct pairwise scopes, each sorted, the list sorted lexicographically.
    std::vector<std::pair<VarId, VarId>> pairwise_edges() const;

    std::vector<int> cards_of(const std::vector<VarId>& scope) const;

private:
    std::vector<VariableDecl> vars_;
    std::vector<Factor> factors_;
};

struct ExactResult {
    std::vector<Eigen::ArrayXd> marginals; // one per variable, sums to 1
    double log_partition = 0.0;
};

/// Ground-truth oracle: exhaustive enumeration of the joint state space.
/// Errors: StateSpaceTooLarge when the joint space exceeds state_limit,
/// ZeroPartition when every joint weight is zero.
ExactResult exact_inference(const FactorGraph& fg, Index state_limit = Index(1) << 24);

enum class PotentialStyle { minka_qi, uniform_small, gaussian };

struct GeneratorOptions {
    double edge_prob = 0.75;        // gaussian style on complete models: edge inclusion probability
    double minka_qi_strength = 1.0; // scale of the stand-in minka_qi weights
    bool grid_biases = false;       // grid models: also draw per-node bias factors
};

/// Pairwise binary spin models: factor exp(w*s_i*s_j) per edge and exp(b*s_i)
/// per node, with s in {-1,+1} (state 0 -> -1, state 1 -> +1).
FactorGraph spin_model(int n, const std::vector<std::pair<int, int>>& edges,
                       const std::vector<double>& weights, const std::vector<double>& biases);

FactorGraph random_complete_model(int n, std::uint64_t seed, PotentialStyle style,
                                  const GeneratorOptions& opt = {});
FactorGraph random_bipartite_model(int n_left, int n_right, std::uint64_t seed,
                                   PotentialStyle style = PotentialStyle::uniform_small,
                                   const GeneratorOptions& opt = {});
/// Pairwise factors on the edges of a rows x cols grid, no node biases.
/// Variable (r, c) has index r*cols + c.
FactorGraph grid_model(int rows, int cols, std::uint64_t seed,
                       PotentialStyle style = PotentialStyle::uniform_small,
                       const GeneratorOptions& opt = {});

} // namespace srg

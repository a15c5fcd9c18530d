#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srg/table.hpp"

namespace srg {

using RegionId = std::int32_t;

/// A clique: a nonempty, sorted set of variable ids. In the discrete case the
/// clique alone determines the region's exponential-family features over it.
struct Clique {
    std::vector<VarId> vars;

    friend bool operator==(const Clique& a, const Clique& b) { return a.vars == b.vars; }
    friend auto operator<=>(const Clique& a, const Clique& b) { return a.vars <=> b.vars; }
};

/// True when inner's variables all lie inside outer.
bool clique_contains(const Clique& outer, const Clique& inner);

Clique make_clique(std::vector<VarId> vars);

struct Region {
    RegionId id = -1;
    std::vector<VarId> vars;       // sorted
    std::vector<Clique> cliques;   // sorted lexicographically, deduplicated
    std::vector<FactorId> factors; // sorted; nonempty only on outer regions
};

/// Directed acyclic graph of regions. Value semantics: reduction operators
/// produce new graphs rather than mutating shared state, so concurrent reads
/// of one graph are safe.
class RegionGraph {
public:
    RegionId add_region(std::vector<VarId> vars, std::vector<Clique> cliques,
                        std::vector<FactorId> factors = {});
    void add_edge(RegionId parent, RegionId child);
    void remove_edge(RegionId parent, RegionId child);
    void remove_region(RegionId id);

    bool has_region(RegionId id) const { return regions_.count(id) != 0; }
    bool has_edge(RegionId p, RegionId c) const { return edges_.count({p, c}) != 0; }
    const Region& region(RegionId id) const;
    Region& region_mut(RegionId id);
    const std::map<RegionId, Region>& regions() const { return regions_; }
    const std::set<std::pair<RegionId, RegionId>>& edges() const { return edges_; }
    std::size_t n_regions() const { return regions_.size(); }

    std::vector<RegionId> region_ids() const;
    std::vector<RegionId> parents(RegionId id) const;
    std::vector<RegionId> children(RegionId id) const;
    std::set<RegionId> ancestors(RegionId id) const;
    std::set<RegionId> descendants(RegionId id) const;
    bool is_outer(RegionId id) const;
    std::vector<RegionId> outer_regions() const;
    std::vector<RegionId> inner_regions() const;

    /// Parents-before-children order; errors with CyclicGraph on a cycle.
    std::vector<RegionId> topological_order() const;

    /// Longest path length from any outer region; outer regions have depth 0.
    std::map<RegionId, int> depths() const;

    /// Union of all region variable sets.
    std::vector<VarId> all_vars() const;

    // Factor scopes are carried so structural operations need no model object.
    void set_factor_scope(FactorId f, std::vector<VarId> scope);
    const std::vector<VarId>& factor_scope(FactorId f) const;
    const std::map<FactorId, std::vector<VarId>>& factor_scopes() const { return factor_scopes_; }

    // Display names used by serialization and DOT export.
    void set_var_name(VarId v, std::string name);
    std::string var_name(VarId v) const;
    void set_factor_name(FactorId f, std::string name);
    std::string factor_name(FactorId f) const;
    const std::map<VarId, std::string>& var_names() const { return var_names_; }

private:
    std::map<RegionId, Region> regions_;
    std::set<std::pair<RegionId, RegionId>> edges_;  // (parent, child)
    std::set<std::pair<RegionId, RegionId>> redges_; // (child, parent)
    std::map<FactorId, std::vector<VarId>> factor_scopes_;
    std::map<VarId, std::string> var_names_;
    std::map<FactorId, std::string> factor_names_;
    RegionId next_id_ = 0;
};

/// Integer region weights from the ancestor recursion c_R = 1 - sum over
/// ancestors of c_A, evaluated in topological order.
struct CountingNumbers {
    std::map<RegionId, int> c;
    int total = 0;
    int at(RegionId id) const { return c.at(id); }
};

CountingNumbers counting_numbers(const RegionGraph& rg);
int total_counting_number(const RegionGraph& rg);

/// R subsumes D when every clique of D is contained in some clique of R.
bool subsumes(const Region& r, const Region& d);

struct ValidityReport {
    std::map<VarId, bool> connected_per_variable;
    std::map<VarId, bool> balanced_per_variable;
    std::map<std::pair<RegionId, RegionId>, bool> hierarchy_ok;
    bool structure_ok = true; // per-region invariants, DAG-ness, factor placement
    bool overall = false;
    std::vector<std::string> problems;
};

/// Checks the three validity conditions (connectedness and balancedness of
/// every RG(i), hierarchy along every edge) plus structural region invariants.
/// Failures are reported, never thrown.
ValidityReport validate(const RegionGraph& rg);

/// Undirected edges linking any two variables sharing a clique or a factor of r.
std::set<std::pair<VarId, VarId>> structure_graph(const RegionGraph& rg, RegionId r);

/// True when the union graph of the cliques is chordal and the given cliques
/// are exactly its maximal cliques.
bool is_decomposable(const std::vector<Clique>& cliques);

/// A region is complete when one clique covers all of its variables.
bool is_complete(const Region& r);

/// No undirected cycles among region nodes.
bool is_acyclic(const RegionGraph& rg);

/// Drops cliques contained in another clique of the set.
std::vector<Clique> maximal_cliques(std::vector<Clique> cliques);

/// Structural isomorphism: a bijection matching region variable sets and
/// preserving edges. Factor placement and outer-region clique detail are not
/// compared (they do not affect the fixed points).
bool isomorphic(const RegionGraph& a, const RegionGraph& b);

} // namespace srg

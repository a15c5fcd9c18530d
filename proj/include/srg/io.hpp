#pragma once

#include <iosfwd>
#include <string>

#include "srg/factor_graph.hpp"
#include "srg/region_graph.hpp"

namespace srg {

// Text model format (round-trips bit-exactly; see README for the grammar):
//   srg-model
//   var <name> <cardinality>
//   factor <name> <arity> <scope names...> <values... (row-major)>
//   end
std::string write_model(const FactorGraph& fg);
FactorGraph read_model(std::istream& in);
FactorGraph read_model_file(const std::string& path);
void write_model_file(const FactorGraph& fg, const std::string& path);

// Text region-graph format: variable universe, factor scope declarations,
// region blocks and an edge list. Self-contained; when a model is supplied the
// names are resolved against it.
std::string write_region_graph(const RegionGraph& rg);
RegionGraph read_region_graph(std::istream& in, const FactorGraph* fg = nullptr);
RegionGraph read_region_graph_file(const std::string& path, const FactorGraph* fg = nullptr);
void write_region_graph_file(const RegionGraph& rg, const std::string& path);

/// DOT rendering with one box per region, labeled with its variables and
/// counting number.
std::string to_dot(const RegionGraph& rg);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace srg

#pragma once

#include <string>

#include "cmap/concept_graph.hpp"

namespace cmap {

/// Undirected DOT: nodes sorted by canonical, edge weights to four decimals.
std::string export_dot(const ConceptGraph& graph);

/// {"edges":[{"s","t","w"}],"nodes":[{"canonical","first_pos","freq","id"}]}
/// with sorted keys and full-precision weights.
std::string export_json(const ConceptGraph& graph);
ConceptGraph import_json(const std::string& text);

}  // namespace cmap

#pragma once

#include <string>

#include "pathwager/graph.hpp"
#include "pathwager/strategy.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

/// Graphviz digraph. Terminals are drawn as double circles with their value;
/// with a profile, edges carry the chooser probability, and with a solution,
/// nodes carry their value.
std::string to_dot(const GameGraph& graph, const StrategyProfile* profile = nullptr,
                   const GameSolution* solution = nullptr);

}  // namespace pathwager

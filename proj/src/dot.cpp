#include "pathwager/dot.hpp"

#include <sstream>

namespace pathwager {

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string number(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

std::string to_dot(const GameGraph& graph, const StrategyProfile* profile, const GameSolution* solution) {
  if (profile != nullptr) validate_profile(graph, *profile);
  std::ostringstream os;
  os << "digraph game {\n  rankdir=LR;\n  node [shape=circle];\n";
  for (NodeId i = 0; i < graph.size(); ++i) {
    std::string text = graph.label(i);
    if (graph.is_terminal(i)) {
      text += "\\nv=" + number(graph.terminal_value(i));
      os << "  " << quote(graph.label(i)) << " [shape=doublecircle, style=filled, fillcolor=lightgrey, label="
         << quote(text) << "];\n";
      continue;
    }
    if (solution != nullptr) text += "\\nv=" + number(solution->values[static_cast<Eigen::Index>(i)]);
    if (profile != nullptr) text += "\\nw=" + number(profile->wagers[i]);
    os << "  " << quote(graph.label(i)) << " [label=" << quote(text) << "];\n";
  }
  for (NodeId i = 0; i < graph.size(); ++i) {
    const auto succ = graph.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      std::string text = graph.edge_label(i, k);
      if (profile != nullptr) {
        if (!text.empty()) text += "\\n";
        text += "p=" + number(profile->chooser[i][k]);
      }
      os << "  " << quote(graph.label(i)) << " -> " << quote(graph.label(succ[k]));
      if (!text.empty()) os << " [label=" << quote(text) << "]";
      os << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace pathwager

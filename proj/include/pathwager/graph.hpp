#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

namespace pathwager {

using NodeId = std::size_t;
using Rational = boost::multiprecision::cpp_rational;

/// Raised for malformed input documents and graph invariant violations.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TerminalValue {
  double value = 1.0;
  /// Present when the value was supplied as an exact fraction.
  std::optional<Rational> exact;

  friend bool operator==(const TerminalValue&, const TerminalValue&) = default;
};

struct EdgeSpec {
  NodeId from = 0;
  NodeId to = 0;
  /// Free-form edge annotation ("truth", "lie", "stop", ...). May be empty.
  std::string label;
};

/// Directed game arena with valued terminal nodes.
///
/// Nodes are dense indices 0..N-1 carrying string labels in insertion order.
/// A node is terminal iff it has no outgoing edge; every terminal carries a
/// strictly positive value and no other node does. Successor lists are sorted
/// by index. Instances are immutable once built.
class GameGraph {
 public:
  GameGraph() = default;

  /// Validates and builds a graph. Throws GraphError on duplicate labels,
  /// dangling indices, multi-edges, missing or non-positive terminal values,
  /// or values attached to non-terminal nodes.
  static GameGraph create(std::vector<std::string> labels, std::vector<EdgeSpec> edges,
                          std::unordered_map<NodeId, TerminalValue> values);

  std::size_t size() const { return labels_.size(); }
  std::size_t edge_count() const;

  const std::string& label(NodeId i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<NodeId> find(std::string_view label) const;

  std::span<const NodeId> successors(NodeId i) const { return succ_.at(i); }
  /// Label of the k-th outgoing edge of i (parallel to successors(i)).
  const std::string& edge_label(NodeId i, std::size_t k) const { return edge_labels_.at(i).at(k); }
  bool has_edge(NodeId from, NodeId to) const;
  bool has_edge_labels() const;
  std::size_t out_degree(NodeId i) const { return succ_.at(i).size(); }

  bool is_terminal(NodeId i) const { return succ_.at(i).empty(); }
  std::vector<NodeId> terminals() const;
  std::vector<NodeId> non_terminals() const;

  /// Terminal value v_j. Throws GraphError for non-terminal nodes.
  double terminal_value(NodeId j) const;
  const std::optional<Rational>& exact_terminal_value(NodeId j) const;
  /// Exact value if one was given, otherwise the binary value of the double.
  Rational exact_or_converted_value(NodeId j) const;

  std::vector<std::vector<NodeId>> predecessors() const;

  friend bool operator==(const GameGraph&, const GameGraph&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<NodeId>> succ_;
  std::vector<std::vector<std::string>> edge_labels_;
  std::vector<std::optional<TerminalValue>> values_;
};

/// Structural class of a graph. Fan refines Tree refines Terminating.
struct GraphClass {
  enum class Kind { Fan, Tree, Terminating, StronglyConnectedAperiodic, Unsupported };

  Kind kind = Kind::Unsupported;
  std::string reason;  // set for Unsupported

  bool is_terminating() const {
    return kind == Kind::Fan || kind == Kind::Tree || kind == Kind::Terminating;
  }
  bool is_strongly_connected() const { return kind == Kind::StronglyConnectedAperiodic; }
  bool is_supported() const { return kind != Kind::Unsupported; }
  bool is_tree() const { return kind == Kind::Fan || kind == Kind::Tree; }

  friend bool operator==(const GraphClass&, const GraphClass&) = default;
};

std::string to_string(GraphClass::Kind kind);
std::string describe(const GraphClass& cls);

GameGraph parse_graph(std::string_view text);
GameGraph parse_graph(const nlohmann::json& doc);
inline GameGraph parse_graph(const std::string& text) { return parse_graph(std::string_view(text)); }
inline GameGraph parse_graph(const char* text) { return parse_graph(std::string_view(text)); }
GameGraph load_graph(const std::string& path);
nlohmann::json graph_to_json(const GameGraph& graph);
std::string serialize_graph(const GameGraph& graph);

GraphClass classify(const GameGraph& graph);

/// Period of a strongly connected graph: gcd of all cycle lengths, via BFS
/// levels from node 0. Throws GraphError unless the graph has no terminals
/// and is strongly connected.
std::size_t aperiodicity_gcd(const GameGraph& graph);

/// Strongly connected components (Tarjan); component ids in reverse
/// topological order of the condensation.
std::vector<std::size_t> strongly_connected_components(const GameGraph& graph,
                                                       std::size_t* count = nullptr);

/// Nodes that can reach some terminal node.
std::vector<bool> reaches_terminal(const GameGraph& graph);

/// Root of a tree-shaped graph, if the graph is a rooted out-tree.
std::optional<NodeId> tree_root(const GameGraph& graph);

}  // namespace pathwager

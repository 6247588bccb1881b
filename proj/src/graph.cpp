#include "pathwager/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace pathwager {

namespace {

Rational parse_fraction(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      return Rational(boost::multiprecision::cpp_int(text));
    }
    boost::multiprecision::cpp_int num(text.substr(0, slash));
    boost::multiprecision::cpp_int den(text.substr(slash + 1));
    if (den == 0) throw GraphError("zero denominator in value \"" + text + "\"");
    return Rational(num, den);
  } catch (const GraphError&) {
    throw;
  } catch (const std::exception&) {
    throw GraphError("cannot parse exact value \"" + text + "\"");
  }
}

TerminalValue parse_value(const std::string& label, const nlohmann::json& v) {
  TerminalValue out;
  if (v.is_number()) {
    out.value = v.get<double>();
  } else if (v.is_string()) {
    out.exact = parse_fraction(v.get<std::string>());
  } else if (v.is_array() && v.size() == 2 && v[0].is_number_integer() &&
             v[1].is_number_integer()) {
    const auto den = v[1].get<std::int64_t>();
    if (den == 0) throw GraphError("zero denominator in value of \"" + label + "\"");
    out.exact = Rational(v[0].get<std::int64_t>(), den);
  } else {
    throw GraphError("value of \"" + label + "\" must be a number, \"p/q\" or [p, q]");
  }
  if (out.exact) out.value = out.exact->convert_to<double>();
  return out;
}

std::string rational_text(const Rational& r) {
  std::ostringstream os;
  os << numerator(r) << '/' << denominator(r);
  return os.str();
}

}  // namespace

GameGraph GameGraph::create(std::vector<std::string> labels, std::vector<EdgeSpec> edges,
                            std::unordered_map<NodeId, TerminalValue> values) {
  GameGraph g;
  const std::size_t n = labels.size();
  {
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (!seen.insert(l).second) throw GraphError("duplicate node label \"" + l + "\"");
    }
  }
  std::vector<std::vector<std::pair<NodeId, std::string>>> adj(n);
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) throw GraphError("edge references a node index out of range");
    adj[e.from].emplace_back(e.to, e.label);
  }
  g.succ_.resize(n);
  g.edge_labels_.resize(n);
  for (NodeId i = 0; i < n; ++i) {
    auto& out = adj[i];
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (k > 0 && out[k].first == out[k - 1].first) {
        throw GraphError("duplicate edge \"" + labels[i] + "\" -> \"" + labels[out[k].first] +
                         "\"");
      }
      g.succ_[i].push_back(out[k].first);
      g.edge_labels_[i].push_back(std::move(out[k].second));
    }
  }
  g.values_.resize(n);
  for (auto& [node, value] : values) {
    if (node >= n) throw GraphError("value references a node index out of range");
    if (!g.succ_[node].empty()) {
      throw GraphError("edge out of terminal node \"" + labels[node] +
                       "\": a node carrying a value must have no outgoing edges");
    }
    if (!(value.value > 0.0) || (value.exact && *value.exact <= 0)) {
      throw GraphError("terminal value of \"" + labels[node] + "\" must be strictly positive");
    }
    g.values_[node] = std::move(value);
  }
  for (NodeId i = 0; i < n; ++i) {
    if (g.succ_[i].empty() && !g.values_[i]) {
      throw GraphError("terminal node \"" + labels[i] + "\" lacks a value");
    }
  }
  g.labels_ = std::move(labels);
  return g;
}

std::size_t GameGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& s : succ_) total += s.size();
  return total;
}

std::optional<NodeId> GameGraph::find(std::string_view label) const {
  for (NodeId i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

bool GameGraph::has_edge(NodeId from, NodeId to) const {
  const auto& s = succ_.at(from);
  return std::binary_search(s.begin(), s.end(), to);
}

bool GameGraph::has_edge_labels() const {
  for (const auto& ls : edge_labels_) {
    for (const auto& l : ls) {
      if (!l.empty()) return true;
    }
  }
  return false;
}

std::vector<NodeId> GameGraph::terminals() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i) {
    if (is_terminal(i)) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> GameGraph::non_terminals() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i) {
    if (!is_terminal(i)) out.push_back(i);
  }
  return out;
}

double GameGraph::terminal_value(NodeId j) const {
  const auto& v = values_.at(j);
  if (!v) throw GraphError("node \"" + labels_.at(j) + "\" is not terminal");
  return v->value;
}

const std::optional<Rational>& GameGraph::exact_terminal_value(NodeId j) const {
  const auto& v = values_.at(j);
  if (!v) throw GraphError("node \"" + labels_.at(j) + "\" is not terminal");
  return v->exact;
}

Rational GameGraph::exact_or_converted_value(NodeId j) const {
  const auto& exact = exact_terminal_value(j);
  if (exact) return *exact;
  return Rational(terminal_value(j));
}

std::vector<std::vector<NodeId>> GameGraph::predecessors() const {
  std::vector<std::vector<NodeId>> pred(size());
  for (NodeId i = 0; i < size(); ++i) {
    for (NodeId j : succ_[i]) pred[j].push_back(i);
  }
  return pred;
}

std::string to_string(GraphClass::Kind kind) {
  switch (kind) {
    case GraphClass::Kind::Fan: return "fan";
    case GraphClass::Kind::Tree: return "tree";
    case GraphClass::Kind::Terminating: return "terminating";
    case GraphClass::Kind::StronglyConnectedAperiodic: return "strongly-connected-aperiodic";
    case GraphClass::Kind::Unsupported: return "unsupported";
  }
  return "unsupported";
}

std::string describe(const GraphClass& cls) {
  if (cls.kind == GraphClass::Kind::Unsupported) return "unsupported: " + cls.reason;
  return to_string(cls.kind);
}

GameGraph parse_graph(const nlohmann::json& doc) {
  if (!doc.is_object()) throw GraphError("graph document must be a JSON object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw GraphError("graph document needs a \"nodes\" array");
  }
  std::vector<std::string> labels;
  std::unordered_map<std::string, NodeId> index;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string()) throw GraphError("node labels must be strings");
    const auto label = n.get<std::string>();
    if (!index.emplace(label, labels.size()).second) {
      throw GraphError("duplicate node label \"" + label + "\"");
    }
    labels.push_back(label);
  }
  auto lookup = [&](const nlohmann::json& ref) -> NodeId {
    if (!ref.is_string()) throw GraphError("edge endpoints must be node labels");
    const auto label = ref.get<std::string>();
    auto it = index.find(label);
    if (it == index.end()) throw GraphError("dangling reference to unknown node \"" + label + "\"");
    return it->second;
  };
  std::vector<EdgeSpec> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw GraphError("\"edges\" must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) {
        throw GraphError("each edge must be [from, to] or [from, to, label]");
      }
      EdgeSpec spec{lookup(e[0]), lookup(e[1]), {}};
      if (e.size() == 3) {
        if (!e[2].is_string()) throw GraphError("edge labels must be strings");
        spec.label = e[2].get<std::string>();
      }
      edges.push_back(std::move(spec));
    }
  }
  std::unordered_map<NodeId, TerminalValue> values;
  if (doc.contains("values")) {
    if (!doc["values"].is_object()) throw GraphError("\"values\" must be an object");
    for (const auto& [label, v] : doc["values"].items()) {
      auto it = index.find(label);
      if (it == index.end()) {
        throw GraphError("dangling reference to unknown node \"" + label + "\"");
      }
      values.emplace(it->second, parse_value(label, v));
    }
  }
  return GameGraph::create(std::move(labels), std::move(edges), std::move(values));
}

GameGraph parse_graph(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw GraphError(std::string("malformed JSON: ") + e.what());
  }
  return parse_graph(doc);
}

GameGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot read graph file \"" + path + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

nlohmann::json graph_to_json(const GameGraph& graph) {
  nlohmann::json doc;
  doc["nodes"] = graph.labels();
  auto edges = nlohmann::json::array();
  const bool labelled = graph.has_edge_labels();
  for (NodeId i = 0; i < graph.size(); ++i) {
    const auto succ = graph.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      auto e = nlohmann::json::array({graph.label(i), graph.label(succ[k])});
      if (labelled) e.push_back(graph.edge_label(i, k));
      edges.push_back(std::move(e));
    }
  }
  doc["edges"] = std::move(edges);
  auto values = nlohmann::json::object();
  for (NodeId j : graph.terminals()) {
    if (const auto& exact = graph.exact_terminal_value(j)) {
      values[graph.label(j)] = rational_text(*exact);
    } else {
      values[graph.label(j)] = graph.terminal_value(j);
    }
  }
  doc["values"] = std::move(values);
  return doc;
}

std::string serialize_graph(const GameGraph& graph) { return graph_to_json(graph).dump(2); }

std::vector<std::size_t> strongly_connected_components(const GameGraph& graph,
                                                       std::size_t* count) {
  const std::size_t n = graph.size();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<NodeId> stack;
  std::size_t next_index = 0, next_comp = 0;

  std::function<void(NodeId)> visit = [&](NodeId v) {
    index[v] = low[v] = next_index++;
    stack.push_back(v);
    on_stack[v] = true;
    for (NodeId w : graph.successors(v)) {
      if (index[w] == kUnset) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      NodeId w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = next_comp;
      } while (w != v);
      ++next_comp;
    }
  };
  for (NodeId v = 0; v < n; ++v) {
    if (index[v] == kUnset) visit(v);
  }
  if (count) *count = next_comp;
  return comp;
}

std::vector<bool> reaches_terminal(const GameGraph& graph) {
  const auto pred = graph.predecessors();
  std::vector<bool> seen(graph.size(), false);
  std::deque<NodeId> queue;
  for (NodeId t : graph.terminals()) {
    seen[t] = true;
    queue.push_back(t);
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId p : pred[v]) {
      if (!seen[p]) {
        seen[p] = true;
        queue.push_back(p);
      }
    }
  }
  return seen;
}

std::optional<NodeId> tree_root(const GameGraph& graph) {
  const std::size_t n = graph.size();
  if (n < 2 || graph.edge_count() != n - 1) return std::nullopt;
  std::vector<std::size_t> indeg(n, 0);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : graph.successors(i)) {
      if (j == i) return std::nullopt;
      ++indeg[j];
    }
  }
  std::optional<NodeId> root;
  for (NodeId i = 0; i < n; ++i) {
    if (indeg[i] == 0) {
      if (root) return std::nullopt;
      root = i;
    } else if (indeg[i] != 1) {
      return std::nullopt;
    }
  }
  if (!root) return std::nullopt;
  // n-1 edges, unique in-degree-0 root and in-degree 1 elsewhere: connected iff acyclic.
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{*root};
  seen[*root] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    for (NodeId w : graph.successors(v)) {
      if (!seen[w]) {
        seen[w] = true;
        ++visited;
        stack.push_back(w);
      }
    }
  }
  if (visited != n) return std::nullopt;
  return root;
}

std::size_t aperiodicity_gcd(const GameGraph& graph) {
  const std::size_t n = graph.size();
  if (n == 0) throw GraphError("empty graph has no period");
  if (!graph.terminals().empty()) throw GraphError("period is defined only for graphs without terminals");
  std::size_t ncomp = 0;
  strongly_connected_components(graph, &ncomp);
  if (ncomp != 1) throw GraphError("graph is not strongly connected");

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> level(n, kUnset);
  std::deque<NodeId> queue{0};
  level[0] = 0;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : graph.successors(v)) {
      if (level[w] == kUnset) {
        level[w] = level[v] + 1;
        queue.push_back(w);
      }
    }
  }
  std::size_t g = 0;
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId w : graph.successors(v)) {
      const auto lhs = static_cast<long long>(level[v]) + 1;
      const auto rhs = static_cast<long long>(level[w]);
      g = std::gcd(g, static_cast<std::size_t>(lhs > rhs ? lhs - rhs : rhs - lhs));
    }
  }
  return g;
}

GraphClass classify(const GameGraph& graph) {
  using Kind = GraphClass::Kind;
  const std::size_t n = graph.size();
  if (n == 0) return {Kind::Unsupported, "empty graph"};

  const auto terminals = graph.terminals();
  if (!terminals.empty()) {
    const auto reach = reaches_terminal(graph);
    for (NodeId i = 0; i < n; ++i) {
      if (!reach[i]) {
        return {Kind::Unsupported,
                "node \"" + graph.label(i) +
                    "\" cannot reach any terminal node (neither terminating nor strongly connected)"};
      }
    }
    if (const auto root = tree_root(graph)) {
      bool fan = true;
      for (NodeId j : graph.successors(*root)) fan = fan && graph.is_terminal(j);
      return {fan ? Kind::Fan : Kind::Tree, {}};
    }
    return {Kind::Terminating, {}};
  }

  std::size_t ncomp = 0;
  strongly_connected_components(graph, &ncomp);
  if (ncomp != 1) {
    return {Kind::Unsupported, "no terminal nodes and not strongly connected (" +
                                   std::to_string(ncomp) + " strongly connected components)"};
  }
  const std::size_t period = aperiodicity_gcd(graph);
  if (period != 1) {
    return {Kind::Unsupported, "periodic (period " + std::to_string(period) + ")"};
  }
  return {Kind::StronglyConnectedAperiodic, {}};
}

}  // namespace pathwager

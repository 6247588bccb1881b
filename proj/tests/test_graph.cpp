#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "corpus.hpp"
#include "oracles.hpp"
#include "pathwager/graph.hpp"
#include "pathwager/oracle.hpp"

using namespace pathwager;
using namespace pathwager::testkit;

namespace {

template <typename F>
void expect_graph_error(F&& f, const std::string& fragment) {
  try {
    f();
    FAIL() << "expected GraphError containing \"" << fragment << "\"";
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(GraphParse, FanDocument) {
  const auto g = parse_graph(R"({"nodes":["r","a","b"],"edges":[["r","a"],["r","b"]],"values":{"a":2,"b":4}})");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(g.out_degree(0), 2u);
  EXPECT_TRUE(g.is_terminal(1));
  EXPECT_DOUBLE_EQ(g.terminal_value(2), 4.0);
  EXPECT_EQ(*g.find("b"), 2u);
  EXPECT_FALSE(g.find("zzz").has_value());
  EXPECT_EQ(classify(g).kind, GraphClass::Kind::Fan);
}

TEST(GraphParse, ExactValuesAndEdgeLabels) {
  const auto g = parse_graph(
      R"({"nodes":["r","a","b","c"],"edges":[["r","a","x"],["r","b"],["r","c"]],"values":{"a":"2/3","b":[5,4],"c":0.5}})");
  EXPECT_EQ(*g.exact_terminal_value(1), Rational(2, 3));
  EXPECT_EQ(*g.exact_terminal_value(2), Rational(5, 4));
  EXPECT_FALSE(g.exact_terminal_value(3).has_value());
  EXPECT_EQ(g.exact_or_converted_value(3), Rational(1, 2));
  EXPECT_EQ(g.edge_label(0, 0), "x");
  EXPECT_EQ(g.edge_label(0, 1), "");
  EXPECT_TRUE(g.has_edge_labels());
}

TEST(GraphParse, RoundTrip) {
  for (const auto& entry : full_corpus()) {
    EXPECT_EQ(parse_graph(serialize_graph(entry.graph)), entry.graph) << entry.name;
  }
  const auto exact = make_exact_fan({{1, 3}, {7, 2}});
  EXPECT_EQ(parse_graph(serialize_graph(exact)), exact);
}

TEST(GraphParse, RejectsBadDocuments) {
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]]})"); }, "lacks a value");
  expect_graph_error([] { parse_graph(R"({"nodes":["r"],"edges":[["r","q"]]})"); }, "dangling reference");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]],"values":{"q":1}})"); },
                     "dangling reference");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]],"values":{"a":0}})"); },
                     "strictly positive");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]],"values":{"a":-2}})"); },
                     "strictly positive");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]],"values":{"a":1,"r":1}})"); },
                     "edge out of terminal");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"],["r","a"]],"values":{"a":1}})"); },
                     "duplicate edge");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","r"]})"); }, "duplicate node label");
  expect_graph_error([] { parse_graph(R"({"nodes":["r","a"],"edges":[["r","a"]],"values":{"a":"1/0"}})"); },
                     "zero denominator");
  expect_graph_error([] { parse_graph("{\"nodes\": [\"r\""); }, "malformed JSON");
  expect_graph_error([] { parse_graph(R"({"edges":[]})"); }, "nodes");
  expect_graph_error([] { load_graph("/nonexistent/graph.json"); }, "cannot read");
}

TEST(GraphClassify, Kinds) {
  EXPECT_EQ(classify(make_fan({2, 4})).kind, GraphClass::Kind::Fan);
  EXPECT_EQ(classify(make_fan({5})).kind, GraphClass::Kind::Fan);
  EXPECT_EQ(classify(make_two_level_tree(2, 4, 2, 4)).kind, GraphClass::Kind::Tree);
  EXPECT_EQ(classify(make_loop_graph()).kind, GraphClass::Kind::Terminating);
  EXPECT_EQ(classify(build_stopping_variant(3)).kind, GraphClass::Kind::Terminating);
  EXPECT_EQ(classify(build_window_game(3, 1)).kind, GraphClass::Kind::StronglyConnectedAperiodic);
  EXPECT_EQ(classify(parse_graph(R"({"nodes":["t"],"values":{"t":1}})")).kind, GraphClass::Kind::Terminating);
}

TEST(GraphClassify, Unsupported) {
  const auto periodic = parse_graph(R"({"nodes":["a","b"],"edges":[["a","b"],["b","a"]]})");
  auto cls = classify(periodic);
  EXPECT_EQ(cls.kind, GraphClass::Kind::Unsupported);
  EXPECT_NE(cls.reason.find("period 2"), std::string::npos) << cls.reason;

  const auto trapped = parse_graph(R"({"nodes":["a","b","t"],"edges":[["a","t"],["a","b"],["b","b"]],"values":{"t":1}})");
  cls = classify(trapped);
  EXPECT_EQ(cls.kind, GraphClass::Kind::Unsupported);
  EXPECT_NE(cls.reason.find("\"b\""), std::string::npos) << cls.reason;

  const auto split = parse_graph(R"({"nodes":["a","b"],"edges":[["a","a"],["b","b"]]})");
  EXPECT_EQ(classify(split).kind, GraphClass::Kind::Unsupported);
  EXPECT_EQ(classify(GameGraph{}).kind, GraphClass::Kind::Unsupported);
}

TEST(GraphClassify, PeriodMatchesCycleEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 7;
    std::vector<EdgeSpec> edges;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back("v" + std::to_string(i));
      edges.push_back({i, (i + 1) % n, ""});
    }
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    for (int e = trial % 3; e > 0; --e) {
      const NodeId a = node(rng), b = node(rng);
      const bool seen = std::any_of(edges.begin(), edges.end(), [&](const EdgeSpec& e) { return e.from == a && e.to == b; });
      if (!seen) edges.push_back({a, b, ""});
    }
    const auto g = GameGraph::create(labels, edges, {});
    const auto expected = cycle_length_gcd(g);
    EXPECT_EQ(aperiodicity_gcd(g), expected);
    EXPECT_EQ(classify(g).kind == GraphClass::Kind::StronglyConnectedAperiodic, expected == 1);
  }
}

TEST(GraphStructure, ComponentsAndRoots) {
  std::size_t count = 0;
  strongly_connected_components(parse_graph(R"({"nodes":["a","b"],"edges":[["a","a"],["b","b"]]})"), &count);
  EXPECT_EQ(count, 2u);
  strongly_connected_components(build_window_game(4, 1), &count);
  EXPECT_EQ(count, 1u);
  EXPECT_EQ(tree_root(make_two_level_tree(1, 2, 3, 4)), NodeId{0});
  EXPECT_FALSE(tree_root(make_loop_graph()).has_value());
  const auto reach = reaches_terminal(make_loop_graph());
  EXPECT_TRUE(reach[0] && reach[1]);
  EXPECT_THROW(aperiodicity_gcd(make_loop_graph()), GraphError);
  EXPECT_THROW(make_fan({2, 4}).terminal_value(0), GraphError);
}

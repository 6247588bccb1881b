#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathwager/graph.hpp"
#include "pathwager/oracle.hpp"

namespace pathwager::testkit {

/// Strings over {T, L} of length <= max_len with at most k lies in every
/// window of n consecutive letters, by direct enumeration.
std::set<std::string> legal_window_strings(std::size_t n, std::size_t k, std::size_t max_len);

/// Edge-label strings (truth -> T, lie -> L) of walks of length <= max_len
/// from `start`.
std::set<std::string> realizable_strings(const GameGraph& graph, NodeId start, std::size_t max_len);

/// Strings of length <= max_len containing none of the patterns.
std::set<std::string> pattern_free_strings(const std::vector<Pattern>& patterns, std::size_t max_len);

/// gcd of the lengths of all simple cycles, by exhaustive enumeration.
std::size_t cycle_length_gcd(const GameGraph& graph);

/// Largest root of l^n - l^(n-1) - 1 by bisection on [1, 2].
double bisect_lambda(std::size_t n);

/// Reciprocal values by plain fixed-point iteration u <- M u from u = 0.
Eigen::VectorXd fixed_point_reciprocals(const GameGraph& graph, std::size_t sweeps = 200000);

}  // namespace pathwager::testkit

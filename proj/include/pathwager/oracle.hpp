#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pathwager/graph.hpp"

namespace pathwager {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome : std::uint8_t { Truth = 0, Lie = 1 };
using Pattern = std::vector<Outcome>;

/// Edge labels used on generated graphs.
inline constexpr std::string_view kTruthLabel = "truth";
inline constexpr std::string_view kLieLabel = "lie";
inline constexpr std::string_view kStopLabel = "stop";

struct OracleSpec {
  enum class Kind { Window, ForbiddenPatterns, WindowWithStop };
  Kind kind = Kind::Window;
  std::size_t n = 1;
  std::size_t k = 0;
  std::vector<Pattern> patterns;
  std::string start_label = "1";
};

/// Partial deterministic automaton over {truth, lie}; every state accepts.
struct OutcomeAutomaton {
  std::size_t start = 0;
  std::vector<std::array<std::optional<std::size_t>, 2>> next;
};

/// Merges states with identical futures (partition refinement) and renumbers
/// the result in breadth-first order from the start, truth before lie.
OutcomeAutomaton minimize(const OutcomeAutomaton& automaton);

/// Nodes "1".."N" in automaton order; edges labelled truth / lie.
GameGraph automaton_to_graph(const OutcomeAutomaton& automaton);

/// At most k lies in any window of n consecutive statements. k = 1
/// reproduces the n-node cycle with a truth loop at the start node.
GameGraph build_window_game(std::size_t n, std::size_t k);

/// Oracle games avoiding every pattern of a reduced set. Throws OracleError
/// when nothing infinite survives or the result is not strongly connected
/// and aperiodic.
GameGraph build_forbidden_pattern_game(const std::vector<Pattern>& patterns);

/// Window game (n, 1) plus a terminal "stop" node of value 1, reachable from
/// the start node and from every node entered only by truth edges. The build
/// is checked against the closed-form stop probabilities and throws
/// OracleError on mismatch.
GameGraph build_stopping_variant(std::size_t n);

GameGraph build_oracle_game(const OracleSpec& spec);

/// "window:N,K", "window-stop:N" or "patterns:<path>".
OracleSpec parse_oracle_spec(std::string_view text);

/// One pattern per line; tokens T/L (or truth/lie), optionally whitespace
/// separated. Blank lines and '#' comments are ignored.
std::vector<Pattern> parse_patterns(std::string_view text);

std::string pattern_to_string(const Pattern& pattern);

/// Closed-form optimal stop probability from node i (1-based) of the
/// stopping variant with window n.
double stopping_probability_closed_form(std::size_t n, std::size_t i);

/// Closed-form optimal play for the one-lie-per-n-window game.
struct Gn1Reference {
  std::size_t n = 2;
  double lambda = 0.0;  // largest root of l^n - l^(n-1) - 1, in [1, 2]
  double r = 0.0;       // lambda / 2
  Eigen::VectorXd x;    // (l^(n-1), 1, l, ..., l^(n-2))
  Eigen::VectorXd y;    // (l^(n-1), l^(n-2), ..., 1)
  double oracle_truth_prob = 0.0;  // 1 / lambda
  double oracle_lie_prob = 0.0;    // lambda^-n
  double bettor_wager = 0.0;       // 1/lambda - lambda^-n
  Eigen::VectorXd mu;              // (l^n, 1, ..., 1) / (l^n + n - 1)
};

Gn1Reference gn1_reference(std::size_t n);

}  // namespace pathwager

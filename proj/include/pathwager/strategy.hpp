#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pathwager/graph.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

/// Positional strategies for both players.
///
/// Rows are indexed by node and aligned with GameGraph::successors(node);
/// terminal nodes have empty rows and a zero wager.
struct StrategyProfile {
  double beta = 1.0;
  std::vector<std::vector<double>> chooser;
  std::vector<std::vector<double>> guesser;
  std::vector<double> wagers;
  std::vector<double> p_min;
};

struct GuesserResponse {
  double wager = 1.0;
  std::vector<double> guess;
};

/// Wagers at or below this are treated as zero; the guess is then uniform.
inline constexpr double kZeroWager = 1e-12;

/// The beta-family optimal guesser reply to a chooser row:
/// w = 1 - n beta p_min, g_j = (p_j - beta p_min) / w, and w = 1, g = (1)
/// for a single successor.
GuesserResponse optimal_guesser_response(std::span<const double> chooser_row, double beta);

/// Minimum-risk wager of a fan, 1 - H / v_max.
double critical_wager(std::span<const double> leaf_values);

/// Limiting strategies induced by a solution.
StrategyProfile build_profile(const GameSolution& solution, const GameGraph& graph, double beta);

/// Guesser side recomputed from arbitrary chooser rows.
StrategyProfile profile_from_chooser(const GameGraph& graph,
                                     std::vector<std::vector<double>> chooser, double beta);

/// P = (1/d) V M V^-1 with terminal self-loops.
Eigen::MatrixXd chooser_transition_matrix(const GameSolution& solution, const GameGraph& graph);

/// Guess distribution at a non-terminal node. Entries within 1e-12 of the
/// unit interval are clamped and the row renormalised; larger violations
/// throw SolveError.
std::vector<double> guess_distribution(const StrategyProfile& profile, NodeId node);

/// Throws SolveError if the profile's shape or probabilities do not fit the graph.
void validate_profile(const GameGraph& graph, const StrategyProfile& profile);

nlohmann::json profile_to_json(const GameGraph& graph, const StrategyProfile& profile);
StrategyProfile profile_from_json(const GameGraph& graph, const nlohmann::json& doc);

}  // namespace pathwager

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pathwager/graph.hpp"

namespace pathwager {

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Propagation matrix M with its non-terminal / terminal partition.
///
/// Row i of M is e_i for a terminal i, 1/2 on the single successor when
/// n_i = 1, and 1/n_i on each successor when n_i >= 2. Strongly connected
/// graphs have no terminal rows.
struct PropagationMatrix {
  Eigen::MatrixXd m;
  std::vector<NodeId> non_terminal;
  std::vector<NodeId> terminal;

  /// NT x NT block.
  Eigen::MatrixXd block_a() const;
  /// NT x T block.
  Eigen::MatrixXd block_b() const;
};

struct SpectralData {
  double r = 1.0;          // Perron eigenvalue of M
  Eigen::VectorXd x;       // right eigenvector, 1-norm normalised
  Eigen::VectorXd y;       // left eigenvector, 1-norm normalised
  double discount = 1.0;   // optimal discount factor, equal to r
  std::size_t iterations = 0;
};

struct GameSolution {
  GraphClass graph_class;
  Eigen::VectorXd values;             // v, strictly positive
  Eigen::VectorXd reciprocal_values;  // u = 1/v
  std::optional<SpectralData> spectral;
  /// Exact values, only produced by the rational tree solver.
  std::optional<std::vector<Rational>> exact_values;

  /// 1 for terminating games, r for strongly connected ones.
  double discount() const { return spectral ? spectral->discount : 1.0; }
};

struct FanSolution {
  double root_value = 0.0;
  std::vector<double> chooser_probs;
};

struct ExactFanSolution {
  Rational root_value;
  std::vector<Rational> chooser_probs;
};

/// Closed-form fan game: 2 v_1 for a single leaf, otherwise the harmonic mean
/// of the leaf values with chooser probabilities proportional to 1/v_j.
FanSolution solve_fan(std::span<const double> leaf_values);
ExactFanSolution solve_fan_exact(std::span<const Rational> leaf_values);

/// Bottom-up recursion on a rooted tree. With `exact`, terminal values are
/// taken as rationals and `exact_values` is filled.
GameSolution solve_tree(const GameGraph& graph, bool exact = false);

PropagationMatrix build_propagation_matrix(const GameGraph& graph);

/// Solves (I - A) u_NT = B u_T by partial-pivoting LU.
GameSolution solve_terminating(const GameGraph& graph);

struct PowerIterationOptions {
  double eigenvalue_tolerance = 1e-13;   // relative change of the estimate of r
  double eigenvector_tolerance = 1e-12;  // 1-norm change of the iterate
  std::size_t max_iterations = 1'000'000;
};

struct PerronPair {
  double value = 0.0;
  Eigen::VectorXd vector;  // positive, 1-norm 1
  std::size_t iterations = 0;
};

/// Power iteration from the all-ones vector. Throws SolveError when the
/// iteration budget runs out.
PerronPair perron_power_iteration(const Eigen::MatrixXd& m, const PowerIterationOptions& options = {});

/// Perron solve for strongly connected aperiodic graphs. The reciprocal values
/// are normalised as u = x (y^T 1) / (x^T y), the limit of r^-s M^s 1.
GameSolution solve_strongly_connected(const GameGraph& graph,
                                      const PowerIterationOptions& options = {});

/// Classifies the graph and dispatches to the matching solver. Throws
/// SolveError for unsupported graphs.
GameSolution solve(const GameGraph& graph);

struct TruncationSeries {
  std::vector<Eigen::VectorXd> steps;  // u_0 .. u_s
  std::vector<double> residuals;       // ||u_t - u||_inf
};

/// Terminating: u_t = M^t u_0 with u_0 = 1 on non-terminals and 1/v_j on
/// terminals. Strongly connected: u_t = r^-t M^t 1.
TruncationSeries truncated_values(const GameGraph& graph, const GameSolution& solution,
                                  std::size_t steps);
TruncationSeries truncated_values(const GameGraph& graph, std::size_t steps);

/// Leaf vector u_0 of the truncated game.
Eigen::VectorXd truncation_start(const GameGraph& graph, const GameSolution& solution);

nlohmann::json solution_to_json(const GameGraph& graph, const GameSolution& solution);
nlohmann::json truncation_to_json(const GameGraph& graph, const TruncationSeries& series);

std::string rational_to_string(const Rational& r);

}  // namespace pathwager

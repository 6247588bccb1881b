#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathwager/graph.hpp"
#include "pathwager/simulator.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

/// Stopping-time quantities under the limiting strategies of a terminating game.
struct StoppingAnalysis {
  std::vector<NodeId> non_terminal;
  std::vector<NodeId> terminal;
  Eigen::VectorXd tau;             // expected stopping time per non-terminal
  Eigen::MatrixXd stop_dist;       // row t-1 holds q_t over non-terminals
  Eigen::VectorXd tail_mass;       // 1 - sum_{t <= t_max} q_t
  Eigen::MatrixXd terminal_probs;  // rho, non-terminal x terminal
};

/// tau = V (I-A)^-1 V^-1 1, q_t = V A^(t-1) B u_T, rho = V (I-A)^-1 B V_T^-1.
StoppingAnalysis stopping_analysis(const GameSolution& solution, const GameGraph& graph,
                                   std::size_t t_max = 500);

/// E[F_T | X_0 = i] composed from rho and the one-step multipliers v_i / v_j.
Eigen::VectorXd expected_final_fortune(const GameSolution& solution, const GameGraph& graph,
                                       const StoppingAnalysis& analysis);

struct FairnessVerdict {
  bool fair = false;        // structural verdict
  std::string reason;
  bool value_fair = false;  // v == 1 (terminating) or r == 1 (strongly connected)
  bool consistent() const { return fair == value_fair; }
};

FairnessVerdict fairness_check(const GameSolution& solution, const GameGraph& graph);

/// mu_i = x_i y_i / (x^T y). Requires spectral data.
Eigen::VectorXd invariant_measure(const GameSolution& solution);

struct SteadyStateFortunes {
  /// mu_j / v_j normalised to sum 1.
  Eigen::VectorXd shape;
  /// Least-squares fit of E[D_t 1{X_t = j}] = c * shape_j at one checkpoint.
  std::optional<double> c_estimate;
  std::optional<double> c_std_error;
  std::optional<std::size_t> checkpoint;
};

/// Shape of the steady-state discounted fortunes, with an optional Monte
/// Carlo estimate of the scale constant from the last checkpoint of `mc`.
SteadyStateFortunes steady_state_fortunes(const GameSolution& solution, const GameGraph& graph,
                                          const SimulationResult* mc = nullptr);

struct MarkovReport {
  Eigen::MatrixXd transition;
  std::optional<StoppingAnalysis> stopping;
  std::optional<Eigen::VectorXd> expected_fortune;
  std::optional<Eigen::VectorXd> invariant;
  std::optional<SteadyStateFortunes> steady_state;
  FairnessVerdict fairness;
};

MarkovReport analyze(const GameSolution& solution, const GameGraph& graph, std::size_t t_max = 500);

nlohmann::json markov_report_to_json(const GameGraph& graph, const MarkovReport& report);
/// q_t series: one row per t, one column per non-terminal start node.
std::string stopping_distribution_csv(const GameGraph& graph, const StoppingAnalysis& analysis);

}  // namespace pathwager

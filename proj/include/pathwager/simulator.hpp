#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pathwager/graph.hpp"
#include "pathwager/strategy.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

/// Independent random stream for one replication, derived from (seed, index)
/// only, so serial and parallel runs draw identical numbers.
class ReplicationRng {
 public:
  ReplicationRng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Index drawn from a probability vector.
  std::size_t sample(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
};

struct StepOutcome {
  NodeId next_node = 0;
  double next_fortune = 0.0;
  std::size_t guess = 0;   // index into successors(node)
  std::size_t choice = 0;  // index into successors(node)
  double wager = 0.0;
  bool correct = false;
};

/// Fortune after one round of the odds-weighted payoff rule: a correct guess
/// at a node of out-degree n >= 2 pays (n - 1) times the wager, at n = 1 it
/// pays the wager, and a wrong guess loses it. `wager` is a fraction of the
/// current fortune.
double apply_payoff(double fortune, std::size_t out_degree, double wager, bool correct);

/// One round: guess and choice are drawn independently from the profile.
StepOutcome play_step(const GameGraph& graph, const StrategyProfile& profile, NodeId node,
                      double fortune, ReplicationRng& rng);

struct SimulationConfig {
  GameGraph graph;
  StrategyProfile profile;
  NodeId start_node = 0;
  std::size_t replications = 1;
  /// Censoring horizon (terminating) or exact horizon (strongly connected).
  std::size_t max_steps = 100'000;
  std::uint64_t seed = 0;
  /// Per-step discount applied to recorded fortunes. Strongly connected runs
  /// normally pass r.
  std::optional<double> discount;
  /// Strongly connected only: times t at which (X_t, d^t F_t) is recorded.
  /// Defaults to {max_steps}.
  std::vector<std::size_t> checkpoints;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct ReplicationRecord {
  double final_fortune = 0.0;  // terminating: F_T including the terminal value
  std::size_t steps = 0;
  NodeId final_node = 0;
  bool censored = false;
  std::vector<NodeId> checkpoint_nodes;
  std::vector<double> checkpoint_fortunes;  // discounted
};

struct CheckpointSummary {
  std::size_t t = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<std::size_t> occupancy;  // per node
  std::vector<double> joint_mean;      // E[D_t 1{X_t = j}]
  std::vector<double> joint_std_error;
};

struct SimulationResult {
  bool terminating = true;
  std::vector<ReplicationRecord> replications;

  // Terminating summary; censored runs are excluded from the means.
  std::size_t completed = 0;
  std::size_t censored = 0;
  double mean_fortune = 0.0;
  double fortune_std_error = 0.0;
  double min_fortune = 0.0;
  double max_fortune = 0.0;
  double mean_steps = 0.0;
  double steps_std_error = 0.0;
  std::vector<std::size_t> terminal_counts;  // per node
  std::vector<std::size_t> steps_histogram;  // index = stopping time

  std::vector<CheckpointSummary> checkpoints;
  std::vector<std::string> warnings;
};

/// Throws SolveError for an invalid configuration.
SimulationResult run(const SimulationConfig& config);

nlohmann::json simulation_to_json(const GameGraph& graph, const SimulationResult& result);
std::string replications_to_csv(const GameGraph& graph, const SimulationResult& result);

enum class Side { Chooser, Guesser };

struct ExploitResult {
  Side fixed_side = Side::Guesser;
  /// Best value the deviating player can force from each node (chooser:
  /// minimum, guesser: maximum). +inf marks unbounded guesser growth.
  std::vector<double> best_values;
  /// Improvement over the game value per node; positive means the deviator
  /// beats the equilibrium.
  std::vector<double> gains;
  double max_gain = 0.0;
  /// Per non-terminal node: successor index played by the deviator, and the
  /// wager for guesser deviations.
  std::vector<std::size_t> deviation_choice;
  std::vector<double> deviation_wager;
};

/// Holds `fixed_side` at the strategy in `profile` and computes the other
/// player's best pure positional reply by exact expectation recursion.
/// Guesser wagers range over a uniform grid of `grid` points in [0, 1].
/// Requires a terminating graph.
ExploitResult exploit_search(const GameGraph& graph, const GameSolution& solution,
                             const StrategyProfile& profile, Side fixed_side,
                             std::size_t grid = 1001);

}  // namespace pathwager

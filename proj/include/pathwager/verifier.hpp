#pragma once

#include <span>
#include <string>
#include <vector>

#include "pathwager/graph.hpp"
#include "pathwager/strategy.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

inline constexpr double kGainTolerance = 1e-9;
inline constexpr double kResidualTolerance = 1e-8;

struct CertificateCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct Certificate {
  std::vector<double> values;
  /// Largest relative amount by which a deviating chooser lowers the value.
  double chooser_gain = 0.0;
  /// Largest relative amount by which a deviating guesser raises the value
  /// over the wager grid.
  double guesser_gain = 0.0;
  double residual = 0.0;
  std::vector<CertificateCheck> checks;

  bool pass() const;
  void add(CertificateCheck check);
};

/// Saddle-point certificate for a fan with n >= 2 leaves. `chooser` and
/// `guesser` are aligned with `leaf_values`; `wager` is the fraction staked.
Certificate certify_fan(std::span<const double> leaf_values, std::span<const double> chooser,
                        std::span<const double> guesser, double wager, std::size_t grid = 1001);

/// Node-by-node fan certificates (leaf values d v_j), value consistency,
/// truncation residual at s = 400 and, for terminating graphs, whole-game
/// exploit searches for both players.
Certificate certify(const GameGraph& graph, const GameSolution& solution,
                    const StrategyProfile& profile, std::size_t grid = 1001);

struct ValueBounds {
  std::vector<double> lower;
  std::vector<double> upper;  // +inf while no path of length <= depth absorbs
  std::vector<bool> censored;
  std::size_t depth = 0;
  std::size_t grid = 0;
};

/// Backward induction on the depth-limited game with guesser wagers on a
/// grid of `grid` points in [0, 1]. Cut-off positions are scored with the
/// smallest terminal value (lower bound) and +inf (upper bound).
ValueBounds brute_force_value(const GameGraph& graph, std::size_t grid = 1001, std::size_t depth = 60);

/// Terminating: M^s against [[0, (I-A)^-1 B], [0, I]]. Strongly connected:
/// r^-s M^s against x y^T / (x^T y), which must be strictly positive.
Certificate audit_convergence(const GameGraph& graph, const GameSolution& solution,
                              std::size_t steps = 400);

nlohmann::json certificate_to_json(const Certificate& certificate);
nlohmann::json bounds_to_json(const GameGraph& graph, const ValueBounds& bounds);

}  // namespace pathwager

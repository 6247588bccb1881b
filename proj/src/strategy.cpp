#include "pathwager/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pathwager {

namespace {

constexpr double kProbTolerance = 1e-12;

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    std::ostringstream os;
    os << "beta must lie in [0, 1], got " << beta;
    throw SolveError(os.str());
  }
}

}  // namespace

GuesserResponse optimal_guesser_response(std::span<const double> chooser_row, double beta) {
  check_beta(beta);
  const std::size_t n = chooser_row.size();
  if (n == 0) throw SolveError("guesser response needs at least one successor");
  GuesserResponse out;
  if (n == 1) {
    out.wager = 1.0;
    out.guess = {1.0};
    return out;
  }
  const double p_min = *std::min_element(chooser_row.begin(), chooser_row.end());
  out.wager = 1.0 - static_cast<double>(n) * beta * p_min;
  out.guess.resize(n);
  if (out.wager <= kZeroWager) {
    std::fill(out.guess.begin(), out.guess.end(), 1.0 / static_cast<double>(n));
    return out;
  }
  for (std::size_t j = 0; j < n; ++j) out.guess[j] = (chooser_row[j] - beta * p_min) / out.wager;
  return out;
}

double critical_wager(std::span<const double> leaf_values) {
  const auto fan = solve_fan(leaf_values);
  if (leaf_values.size() == 1) return 1.0;
  const double v_max = *std::max_element(leaf_values.begin(), leaf_values.end());
  return 1.0 - fan.root_value / v_max;
}

StrategyProfile profile_from_chooser(const GameGraph& graph,
                                     std::vector<std::vector<double>> chooser, double beta) {
  check_beta(beta);
  if (chooser.size() != graph.size()) throw SolveError("chooser rows do not match the graph");
  StrategyProfile profile;
  profile.beta = beta;
  profile.guesser.resize(graph.size());
  profile.wagers.assign(graph.size(), 0.0);
  profile.p_min.assign(graph.size(), 0.0);
  for (NodeId i = 0; i < graph.size(); ++i) {
    if (chooser[i].size() != graph.out_degree(i)) {
      throw SolveError("chooser row of \"" + graph.label(i) + "\" does not match its out-degree");
    }
    if (graph.is_terminal(i)) continue;
    auto reply = optimal_guesser_response(chooser[i], beta);
    profile.wagers[i] = reply.wager;
    profile.guesser[i] = std::move(reply.guess);
    profile.p_min[i] = *std::min_element(chooser[i].begin(), chooser[i].end());
  }
  profile.chooser = std::move(chooser);
  return profile;
}

StrategyProfile build_profile(const GameSolution& solution, const GameGraph& graph, double beta) {
  check_beta(beta);
  if (static_cast<std::size_t>(solution.reciprocal_values.size()) != graph.size()) {
    throw SolveError("solution does not match the graph");
  }
  std::vector<std::vector<double>> chooser(graph.size());
  for (NodeId i = 0; i < graph.size(); ++i) {
    const auto succ = graph.successors(i);
    if (succ.empty()) continue;
    if (succ.size() == 1) {
      chooser[i] = {1.0};
      continue;
    }
    double total = 0.0;
    for (NodeId j : succ) total += solution.reciprocal_values[static_cast<Eigen::Index>(j)];
    for (NodeId j : succ) chooser[i].push_back(solution.reciprocal_values[static_cast<Eigen::Index>(j)] / total);
  }
  return profile_from_chooser(graph, std::move(chooser), beta);
}

Eigen::MatrixXd chooser_transition_matrix(const GameSolution& solution, const GameGraph& graph) {
  const auto pm = build_propagation_matrix(graph);
  const auto& u = solution.reciprocal_values;
  const double d = solution.discount();
  // V M V^-1 has entries M_ij v_i / v_j = M_ij u_j / u_i.
  Eigen::MatrixXd p = u.cwiseInverse().asDiagonal() * pm.m * u.asDiagonal();
  p /= d;
  for (NodeId k : pm.terminal) {
    const auto idx = static_cast<Eigen::Index>(k);
    p.row(idx).setZero();
    p(idx, idx) = 1.0;
  }
  return p;
}

std::vector<double> guess_distribution(const StrategyProfile& profile, NodeId node) {
  if (node >= profile.guesser.size() || profile.guesser[node].empty()) {
    throw SolveError("guess distribution requested at a terminal or unknown node");
  }
  auto g = profile.guesser[node];
  bool clamped = false;
  for (double& x : g) {
    if (x < 0.0 || x > 1.0) {
      const double violation = x < 0.0 ? -x : x - 1.0;
      if (violation > kProbTolerance) {
        std::ostringstream os;
        os << "guess probability " << x << " at node " << node
           << " lies outside [0, 1]; beta and chooser probabilities are inconsistent";
        throw SolveError(os.str());
      }
      x = std::clamp(x, 0.0, 1.0);
      clamped = true;
    }
  }
  if (clamped) {
    const double total = std::accumulate(g.begin(), g.end(), 0.0);
    for (double& x : g) x /= total;
  }
  return g;
}

void validate_profile(const GameGraph& graph, const StrategyProfile& profile) {
  if (profile.chooser.size() != graph.size() || profile.guesser.size() != graph.size() ||
      profile.wagers.size() != graph.size()) {
    throw SolveError("profile shape does not match the graph");
  }
  for (NodeId i = 0; i < graph.size(); ++i) {
    const std::size_t deg = graph.out_degree(i);
    if (deg == 0) continue;
    if (profile.chooser[i].size() != deg || profile.guesser[i].size() != deg) {
      throw SolveError("profile rows of \"" + graph.label(i) + "\" do not match its out-degree");
    }
    for (const auto* row : {&profile.chooser[i], &profile.guesser[i]}) {
      double total = 0.0;
      for (double x : *row) {
        if (x < -kProbTolerance || x > 1.0 + kProbTolerance) {
          throw SolveError("probability outside [0, 1] at \"" + graph.label(i) + "\"");
        }
        total += x;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw SolveError("probabilities at \"" + graph.label(i) + "\" do not sum to 1");
      }
    }
    if (!(profile.wagers[i] >= 0.0 && profile.wagers[i] <= 1.0)) {
      throw SolveError("wager at \"" + graph.label(i) + "\" lies outside [0, 1]");
    }
  }
}

nlohmann::json profile_to_json(const GameGraph& graph, const StrategyProfile& profile) {
  nlohmann::json doc;
  doc["beta"] = profile.beta;
  doc["node_index"] = graph.labels();
  auto nodes = nlohmann::json::object();
  for (NodeId i = 0; i < graph.size(); ++i) {
    if (graph.is_terminal(i)) continue;
    nlohmann::json entry;
    entry["wager"] = profile.wagers[i];
    entry["p_min"] = profile.p_min[i];
    auto chooser = nlohmann::json::object();
    auto guesser = nlohmann::json::object();
    const auto succ = graph.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      chooser[graph.label(succ[k])] = profile.chooser[i][k];
      guesser[graph.label(succ[k])] = profile.guesser[i][k];
    }
    entry["chooser"] = std::move(chooser);
    entry["guesser"] = std::move(guesser);
    nodes[graph.label(i)] = std::move(entry);
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

StrategyProfile profile_from_json(const GameGraph& graph, const nlohmann::json& doc) {
  StrategyProfile profile;
  try {
    profile.beta = doc.value("beta", 1.0);
    profile.chooser.resize(graph.size());
    profile.guesser.resize(graph.size());
    profile.wagers.assign(graph.size(), 0.0);
    profile.p_min.assign(graph.size(), 0.0);
    const auto& nodes = doc.at("nodes");
    for (NodeId i = 0; i < graph.size(); ++i) {
      if (graph.is_terminal(i)) continue;
      const auto& entry = nodes.at(graph.label(i));
      profile.wagers[i] = entry.at("wager").get<double>();
      for (NodeId j : graph.successors(i)) {
        profile.chooser[i].push_back(entry.at("chooser").at(graph.label(j)).get<double>());
        profile.guesser[i].push_back(entry.at("guesser").at(graph.label(j)).get<double>());
      }
      profile.p_min[i] = *std::min_element(profile.chooser[i].begin(), profile.chooser[i].end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SolveError(std::string("malformed profile document: ") + e.what());
  }
  validate_profile(graph, profile);
  return profile;
}

}  // namespace pathwager

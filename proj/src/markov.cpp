#include "pathwager/markov.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "pathwager/strategy.hpp"

namespace pathwager {

namespace {

Eigen::Index idx(NodeId i) { return static_cast<Eigen::Index>(i); }

}  // namespace

StoppingAnalysis stopping_analysis(const GameSolution& solution, const GameGraph& graph,
                                   std::size_t t_max) {
  if (t_max < 1) throw SolveError("t_max must be at least 1");
  if (!solution.graph_class.is_terminating()) {
    throw SolveError("stopping analysis needs a terminating graph");
  }
  const auto pm = build_propagation_matrix(graph);
  const auto nt = static_cast<Eigen::Index>(pm.non_terminal.size());
  const auto tt = static_cast<Eigen::Index>(pm.terminal.size());
  const Eigen::MatrixXd a = pm.block_a();
  const Eigen::MatrixXd b = pm.block_b();

  Eigen::VectorXd v_nt(nt), u_t(tt);
  for (Eigen::Index r = 0; r < nt; ++r) v_nt[r] = solution.values[idx(pm.non_terminal[static_cast<std::size_t>(r)])];
  for (Eigen::Index c = 0; c < tt; ++c) u_t[c] = solution.reciprocal_values[idx(pm.terminal[static_cast<std::size_t>(c)])];

  StoppingAnalysis out;
  out.non_terminal = pm.non_terminal;
  out.terminal = pm.terminal;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(nt, nt) - a);
  out.tau = v_nt.asDiagonal() * lu.solve(v_nt.cwiseInverse());
  out.terminal_probs = v_nt.asDiagonal() * lu.solve(b) * u_t.asDiagonal();

  out.stop_dist.resize(static_cast<Eigen::Index>(t_max), nt);
  Eigen::VectorXd carry = b * u_t;  // A^(t-1) B u_T
  Eigen::VectorXd total = Eigen::VectorXd::Zero(nt);
  for (std::size_t t = 1; t <= t_max; ++t) {
    const Eigen::VectorXd q = v_nt.cwiseProduct(carry);
    out.stop_dist.row(static_cast<Eigen::Index>(t - 1)) = q.transpose();
    total += q;
    carry = a * carry;
  }
  out.tail_mass = Eigen::VectorXd::Ones(nt) - total;
  return out;
}

Eigen::VectorXd expected_final_fortune(const GameSolution& solution, const GameGraph& graph,
                                       const StoppingAnalysis& analysis) {
  Eigen::VectorXd out = solution.values;
  for (std::size_t r = 0; r < analysis.non_terminal.size(); ++r) {
    const NodeId i = analysis.non_terminal[r];
    double total = 0.0;
    for (std::size_t c = 0; c < analysis.terminal.size(); ++c) {
      const NodeId j = analysis.terminal[c];
      // Multipliers along any path telescope to v_i / v_j; the terminal pays v_j.
      const double multiplier = solution.values[idx(i)] / solution.values[idx(j)];
      total += analysis.terminal_probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) *
               multiplier * graph.terminal_value(j);
    }
    out[idx(i)] = total;
  }
  return out;
}

FairnessVerdict fairness_check(const GameSolution& solution, const GameGraph& graph) {
  FairnessVerdict out;
  out.fair = true;
  for (NodeId i = 0; i < graph.size() && out.fair; ++i) {
    if (graph.out_degree(i) == 1) {
      out.fair = false;
      out.reason = "node \"" + graph.label(i) + "\" has out-degree 1";
    }
  }
  if (solution.graph_class.is_terminating()) {
    for (NodeId j : graph.terminals()) {
      if (out.fair && graph.terminal_value(j) != 1.0) {
        out.fair = false;
        std::ostringstream os;
        os << "terminal \"" << graph.label(j) << "\" has value " << graph.terminal_value(j) << " != 1";
        out.reason = os.str();
      }
    }
    out.value_fair = ((solution.values.array() - 1.0).abs() <= 1e-10).all();
    if (out.fair) out.reason = "all terminal values are 1 and every non-terminal has out-degree >= 2";
  } else {
    out.value_fair = solution.spectral && std::abs(solution.spectral->r - 1.0) <= 1e-10;
    if (out.fair) out.reason = "every node has out-degree >= 2";
  }
  return out;
}

Eigen::VectorXd invariant_measure(const GameSolution& solution) {
  if (!solution.spectral) throw SolveError("invariant measure needs a strongly connected solution");
  const auto& s = *solution.spectral;
  return s.x.cwiseProduct(s.y) / s.x.dot(s.y);
}

SteadyStateFortunes steady_state_fortunes(const GameSolution& solution, const GameGraph& graph,
                                          const SimulationResult* mc) {
  const Eigen::VectorXd mu = invariant_measure(solution);
  SteadyStateFortunes out;
  out.shape = mu.cwiseQuotient(solution.values);
  out.shape /= out.shape.sum();
  if (mc == nullptr) return out;
  if (mc->terminating || mc->checkpoints.empty()) {
    throw SolveError("steady-state estimate needs a strongly connected simulation with checkpoints");
  }
  const auto& last = mc->checkpoints.back();
  if (last.occupancy.size() != graph.size()) throw SolveError("simulation does not match the graph");

  // Per replication, z_r = shape_{X_t} D_t / ||shape||^2; its mean is the
  // least-squares slope of the joint means against the shape.
  const double norm2 = out.shape.squaredNorm();
  const std::size_t c = mc->checkpoints.size() - 1;
  const std::size_t reps = mc->replications.size();
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& rec : mc->replications) {
    const double z = out.shape[idx(rec.checkpoint_nodes[c])] * rec.checkpoint_fortunes[c] / norm2;
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / static_cast<double>(reps);
  double se = 0.0;
  if (reps > 1) {
    const double var = (sum_sq - static_cast<double>(reps) * mean * mean) / static_cast<double>(reps - 1);
    se = std::sqrt(std::max(0.0, var) / static_cast<double>(reps));
  }
  out.c_estimate = mean;
  out.c_std_error = se;
  out.checkpoint = last.t;
  return out;
}

MarkovReport analyze(const GameSolution& solution, const GameGraph& graph, std::size_t t_max) {
  MarkovReport report;
  report.transition = chooser_transition_matrix(solution, graph);
  report.fairness = fairness_check(solution, graph);
  if (solution.graph_class.is_terminating()) {
    report.stopping = stopping_analysis(solution, graph, t_max);
    report.expected_fortune = expected_final_fortune(solution, graph, *report.stopping);
  } else {
    report.invariant = invariant_measure(solution);
    report.steady_state = steady_state_fortunes(solution, graph);
  }
  return report;
}

nlohmann::json markov_report_to_json(const GameGraph& graph, const MarkovReport& report) {
  nlohmann::json doc;
  doc["node_index"] = graph.labels();
  auto transition = nlohmann::json::object();
  for (NodeId i = 0; i < graph.size(); ++i) {
    auto row = nlohmann::json::object();
    for (NodeId j = 0; j < graph.size(); ++j) {
      if (report.transition(idx(i), idx(j)) != 0.0) row[graph.label(j)] = report.transition(idx(i), idx(j));
    }
    transition[graph.label(i)] = std::move(row);
  }
  doc["transition"] = std::move(transition);
  doc["fairness"] = {{"fair", report.fairness.fair},
                     {"reason", report.fairness.reason},
                     {"value_fair", report.fairness.value_fair},
                     {"consistent", report.fairness.consistent()}};
  if (report.stopping) {
    const auto& s = *report.stopping;
    auto tau = nlohmann::json::object();
    auto tail = nlohmann::json::object();
    auto rho = nlohmann::json::object();
    for (std::size_t r = 0; r < s.non_terminal.size(); ++r) {
      const auto& li = graph.label(s.non_terminal[r]);
      tau[li] = s.tau[static_cast<Eigen::Index>(r)];
      tail[li] = s.tail_mass[static_cast<Eigen::Index>(r)];
      auto row = nlohmann::json::object();
      for (std::size_t c = 0; c < s.terminal.size(); ++c) {
        row[graph.label(s.terminal[c])] = s.terminal_probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
      rho[li] = std::move(row);
    }
    doc["expected_stopping_time"] = std::move(tau);
    doc["terminal_probabilities"] = std::move(rho);
    doc["stopping_tail_mass"] = std::move(tail);
    doc["t_max"] = s.stop_dist.rows();
  }
  if (report.expected_fortune) {
    auto ef = nlohmann::json::object();
    for (NodeId i = 0; i < graph.size(); ++i) ef[graph.label(i)] = (*report.expected_fortune)[idx(i)];
    doc["expected_final_fortune"] = std::move(ef);
  }
  if (report.invariant) {
    auto mu = nlohmann::json::object();
    for (NodeId i = 0; i < graph.size(); ++i) mu[graph.label(i)] = (*report.invariant)[idx(i)];
    doc["invariant_measure"] = std::move(mu);
  }
  if (report.steady_state) {
    auto shape = nlohmann::json::object();
    for (NodeId i = 0; i < graph.size(); ++i) shape[graph.label(i)] = report.steady_state->shape[idx(i)];
    doc["steady_state_shape"] = std::move(shape);
    if (report.steady_state->c_estimate) {
      doc["steady_state_scale"] = {{"estimate", *report.steady_state->c_estimate},
                                   {"std_error", *report.steady_state->c_std_error},
                                   {"checkpoint", *report.steady_state->checkpoint}};
    }
  }
  return doc;
}

std::string stopping_distribution_csv(const GameGraph& graph, const StoppingAnalysis& analysis) {
  std::ostringstream os;
  os << std::setprecision(12) << 't';
  for (NodeId i : analysis.non_terminal) os << ',' << graph.label(i);
  os << '\n';
  for (Eigen::Index t = 0; t < analysis.stop_dist.rows(); ++t) {
    os << t + 1;
    for (Eigen::Index c = 0; c < analysis.stop_dist.cols(); ++c) os << ',' << analysis.stop_dist(t, c);
    os << '\n';
  }
  return os.str();
}

}  // namespace pathwager

#include "pathwager/values.hpp"

#include <cmath>
#include <sstream>

namespace pathwager {

namespace {

template <typename Scalar>
Scalar fan_reciprocal(std::size_t out_degree, const Scalar& child_sum) {
  if (out_degree == 1) return child_sum / Scalar(2);
  return child_sum / Scalar(static_cast<long long>(out_degree));
}

template <typename Scalar>
std::vector<Scalar> tree_reciprocals(const GameGraph& graph, NodeId root,
                                     const std::vector<Scalar>& terminal_reciprocals) {
  std::vector<Scalar> u(graph.size());
  std::vector<NodeId> order;
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (NodeId w : graph.successors(v)) stack.push_back(w);
  }
  // Reverse preorder visits children before parents.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (graph.is_terminal(v)) {
      u[v] = terminal_reciprocals[v];
      continue;
    }
    Scalar sum(0);
    for (NodeId w : graph.successors(v)) sum += u[w];
    u[v] = fan_reciprocal(graph.out_degree(v), sum);
  }
  return u;
}

}  // namespace

std::string rational_to_string(const Rational& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << '/' << denominator(r);
  return os.str();
}

Eigen::MatrixXd PropagationMatrix::block_a() const {
  Eigen::MatrixXd a(non_terminal.size(), non_terminal.size());
  for (std::size_t r = 0; r < non_terminal.size(); ++r) {
    for (std::size_t c = 0; c < non_terminal.size(); ++c) a(r, c) = m(non_terminal[r], non_terminal[c]);
  }
  return a;
}

Eigen::MatrixXd PropagationMatrix::block_b() const {
  Eigen::MatrixXd b(non_terminal.size(), terminal.size());
  for (std::size_t r = 0; r < non_terminal.size(); ++r) {
    for (std::size_t c = 0; c < terminal.size(); ++c) b(r, c) = m(non_terminal[r], terminal[c]);
  }
  return b;
}

FanSolution solve_fan(std::span<const double> leaf_values) {
  if (leaf_values.empty()) throw SolveError("fan needs at least one leaf");
  for (double v : leaf_values) {
    if (!(v > 0.0)) throw SolveError("fan leaf values must be strictly positive");
  }
  FanSolution out;
  if (leaf_values.size() == 1) {
    out.root_value = 2.0 * leaf_values[0];
    out.chooser_probs = {1.0};
    return out;
  }
  double inv_sum = 0.0;
  for (double v : leaf_values) inv_sum += 1.0 / v;
  out.root_value = static_cast<double>(leaf_values.size()) / inv_sum;
  for (double v : leaf_values) out.chooser_probs.push_back((1.0 / v) / inv_sum);
  return out;
}

ExactFanSolution solve_fan_exact(std::span<const Rational> leaf_values) {
  if (leaf_values.empty()) throw SolveError("fan needs at least one leaf");
  for (const auto& v : leaf_values) {
    if (v <= 0) throw SolveError("fan leaf values must be strictly positive");
  }
  ExactFanSolution out;
  if (leaf_values.size() == 1) {
    out.root_value = 2 * leaf_values[0];
    out.chooser_probs = {Rational(1)};
    return out;
  }
  Rational inv_sum(0);
  for (const auto& v : leaf_values) inv_sum += 1 / v;
  out.root_value = Rational(static_cast<long long>(leaf_values.size())) / inv_sum;
  for (const auto& v : leaf_values) out.chooser_probs.push_back((1 / v) / inv_sum);
  return out;
}

GameSolution solve_tree(const GameGraph& graph, bool exact) {
  const auto cls = classify(graph);
  if (!cls.is_tree()) throw SolveError("graph is not a tree (" + describe(cls) + ")");
  const NodeId root = *tree_root(graph);
  const std::size_t n = graph.size();

  GameSolution sol;
  sol.graph_class = cls;
  sol.values.resize(static_cast<Eigen::Index>(n));
  sol.reciprocal_values.resize(static_cast<Eigen::Index>(n));
  if (exact) {
    std::vector<Rational> leaf(n);
    for (NodeId j : graph.terminals()) leaf[j] = 1 / graph.exact_or_converted_value(j);
    const auto u = tree_reciprocals<Rational>(graph, root, leaf);
    std::vector<Rational> v(n);
    for (NodeId i = 0; i < n; ++i) {
      v[i] = 1 / u[i];
      sol.values[static_cast<Eigen::Index>(i)] = v[i].convert_to<double>();
      sol.reciprocal_values[static_cast<Eigen::Index>(i)] = u[i].convert_to<double>();
    }
    sol.exact_values = std::move(v);
    return sol;
  }
  std::vector<double> leaf(n, 0.0);
  for (NodeId j : graph.terminals()) leaf[j] = 1.0 / graph.terminal_value(j);
  const auto u = tree_reciprocals<double>(graph, root, leaf);
  for (NodeId i = 0; i < n; ++i) {
    sol.reciprocal_values[static_cast<Eigen::Index>(i)] = u[i];
    sol.values[static_cast<Eigen::Index>(i)] = 1.0 / u[i];
  }
  for (NodeId j : graph.terminals()) sol.values[static_cast<Eigen::Index>(j)] = graph.terminal_value(j);
  return sol;
}

PropagationMatrix build_propagation_matrix(const GameGraph& graph) {
  const auto cls = classify(graph);
  if (!cls.is_supported()) throw SolveError("cannot build propagation matrix: " + describe(cls));
  const auto n = static_cast<Eigen::Index>(graph.size());
  PropagationMatrix pm;
  pm.m = Eigen::MatrixXd::Zero(n, n);
  for (NodeId i = 0; i < graph.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const std::size_t deg = graph.out_degree(i);
    if (deg == 0) {
      pm.m(row, row) = 1.0;
      pm.terminal.push_back(i);
      continue;
    }
    pm.non_terminal.push_back(i);
    const double weight = deg == 1 ? 0.5 : 1.0 / static_cast<double>(deg);
    for (NodeId j : graph.successors(i)) pm.m(row, static_cast<Eigen::Index>(j)) = weight;
  }
  return pm;
}

GameSolution solve_terminating(const GameGraph& graph) {
  const auto cls = classify(graph);
  if (!cls.is_terminating()) throw SolveError("graph is not terminating (" + describe(cls) + ")");
  const auto pm = build_propagation_matrix(graph);
  const auto nt = static_cast<Eigen::Index>(pm.non_terminal.size());
  const auto tt = static_cast<Eigen::Index>(pm.terminal.size());

  Eigen::VectorXd u_t(tt);
  for (Eigen::Index c = 0; c < tt; ++c) {
    u_t[c] = 1.0 / graph.terminal_value(pm.terminal[static_cast<std::size_t>(c)]);
  }
  Eigen::VectorXd u_nt(nt);
  if (nt > 0) {
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(nt, nt) - pm.block_a();
    const Eigen::VectorXd rhs = pm.block_b() * u_t;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
    u_nt = lu.solve(rhs);
    const double resid = (lhs * u_nt - rhs).lpNorm<Eigen::Infinity>();
    if (!u_nt.allFinite() || resid > 1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()) ||
        (u_nt.array() <= 0.0).any()) {
      std::ostringstream os;
      os << "internal error: singular or inconsistent system (I - A) u = B u_T, residual " << resid;
      throw SolveError(os.str());
    }
  }

  GameSolution sol;
  sol.graph_class = cls;
  const auto n = static_cast<Eigen::Index>(graph.size());
  sol.reciprocal_values.resize(n);
  sol.values.resize(n);
  for (Eigen::Index r = 0; r < nt; ++r) {
    sol.reciprocal_values[static_cast<Eigen::Index>(pm.non_terminal[static_cast<std::size_t>(r)])] = u_nt[r];
  }
  for (Eigen::Index c = 0; c < tt; ++c) {
    sol.reciprocal_values[static_cast<Eigen::Index>(pm.terminal[static_cast<std::size_t>(c)])] = u_t[c];
  }
  sol.values = sol.reciprocal_values.cwiseInverse();
  for (NodeId j : pm.terminal) sol.values[static_cast<Eigen::Index>(j)] = graph.terminal_value(j);
  return sol;
}

PerronPair perron_power_iteration(const Eigen::MatrixXd& m, const PowerIterationOptions& options) {
  const auto n = m.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double r_prev = 0.0;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    Eigen::VectorXd z = m * x;
    const double r = z.sum();  // x >= 0 with unit 1-norm, so this is ||Mx||_1 / ||x||_1
    if (!(r > 0.0)) throw SolveError("power iteration collapsed to zero");
    z /= r;
    const double dx = (z - x).lpNorm<1>();
    x = std::move(z);
    if (it > 1 && std::abs(r - r_prev) <= options.eigenvalue_tolerance * r &&
        dx <= options.eigenvector_tolerance) {
      return {r, x, it};
    }
    r_prev = r;
  }
  std::ostringstream os;
  os << "power iteration did not converge in " << options.max_iterations
     << " iterations (residual " << (m * x - r_prev * x).lpNorm<Eigen::Infinity>() << ")";
  throw SolveError(os.str());
}

GameSolution solve_strongly_connected(const GameGraph& graph, const PowerIterationOptions& options) {
  const auto cls = classify(graph);
  if (!cls.is_strongly_connected()) {
    throw SolveError("graph is not strongly connected and aperiodic (" + describe(cls) + ")");
  }
  const auto pm = build_propagation_matrix(graph);
  const auto right = perron_power_iteration(pm.m, options);
  const auto left = perron_power_iteration(pm.m.transpose(), options);

  GameSolution sol;
  sol.graph_class = cls;
  SpectralData spec;
  spec.r = right.value;
  spec.discount = right.value;
  spec.x = right.vector;
  spec.y = left.vector;
  spec.iterations = std::max(right.iterations, left.iterations);
  sol.reciprocal_values = spec.x * (spec.y.sum() / spec.x.dot(spec.y));
  sol.values = sol.reciprocal_values.cwiseInverse();
  sol.spectral = std::move(spec);
  return sol;
}

GameSolution solve(const GameGraph& graph) {
  const auto cls = classify(graph);
  switch (cls.kind) {
    case GraphClass::Kind::Fan:
    case GraphClass::Kind::Tree:
      return solve_tree(graph);
    case GraphClass::Kind::Terminating:
      return solve_terminating(graph);
    case GraphClass::Kind::StronglyConnectedAperiodic:
      return solve_strongly_connected(graph);
    case GraphClass::Kind::Unsupported:
      break;
  }
  throw SolveError("unsupported graph: " + cls.reason);
}

Eigen::VectorXd truncation_start(const GameGraph& graph, const GameSolution& solution) {
  Eigen::VectorXd u0 = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(graph.size()));
  if (solution.graph_class.is_terminating()) {
    for (NodeId j : graph.terminals()) u0[static_cast<Eigen::Index>(j)] = 1.0 / graph.terminal_value(j);
  }
  return u0;
}

TruncationSeries truncated_values(const GameGraph& graph, const GameSolution& solution,
                                  std::size_t steps) {
  const auto pm = build_propagation_matrix(graph);
  const double scale = solution.spectral ? 1.0 / solution.spectral->r : 1.0;
  TruncationSeries series;
  Eigen::VectorXd u = truncation_start(graph, solution);
  series.steps.reserve(steps + 1);
  series.residuals.reserve(steps + 1);
  for (std::size_t s = 0; s <= steps; ++s) {
    if (s > 0) u = scale * (pm.m * u);
    series.residuals.push_back((u - solution.reciprocal_values).lpNorm<Eigen::Infinity>());
    series.steps.push_back(u);
  }
  return series;
}

TruncationSeries truncated_values(const GameGraph& graph, std::size_t steps) {
  return truncated_values(graph, solve(graph), steps);
}

nlohmann::json solution_to_json(const GameGraph& graph, const GameSolution& solution) {
  nlohmann::json doc;
  doc["class"] = to_string(solution.graph_class.kind);
  doc["node_index"] = graph.labels();
  auto values = nlohmann::json::object();
  auto recips = nlohmann::json::object();
  for (NodeId i = 0; i < graph.size(); ++i) {
    values[graph.label(i)] = solution.values[static_cast<Eigen::Index>(i)];
    recips[graph.label(i)] = solution.reciprocal_values[static_cast<Eigen::Index>(i)];
  }
  doc["values"] = std::move(values);
  doc["reciprocal_values"] = std::move(recips);
  if (solution.exact_values) {
    auto exact = nlohmann::json::object();
    for (NodeId i = 0; i < graph.size(); ++i) {
      exact[graph.label(i)] = rational_to_string((*solution.exact_values)[i]);
    }
    doc["exact_values"] = std::move(exact);
  }
  if (solution.spectral) {
    const auto& s = *solution.spectral;
    doc["r"] = s.r;
    doc["discount"] = s.discount;
    auto x = nlohmann::json::object();
    auto y = nlohmann::json::object();
    for (NodeId i = 0; i < graph.size(); ++i) {
      x[graph.label(i)] = s.x[static_cast<Eigen::Index>(i)];
      y[graph.label(i)] = s.y[static_cast<Eigen::Index>(i)];
    }
    doc["right_eigenvector"] = std::move(x);
    doc["left_eigenvector"] = std::move(y);
    doc["power_iterations"] = s.iterations;
  }
  return doc;
}

nlohmann::json truncation_to_json(const GameGraph& graph, const TruncationSeries& series) {
  nlohmann::json doc;
  doc["residuals"] = series.residuals;
  if (!series.steps.empty()) {
    auto last = nlohmann::json::object();
    const auto& u = series.steps.back();
    for (NodeId i = 0; i < graph.size(); ++i) last[graph.label(i)] = u[static_cast<Eigen::Index>(i)];
    doc["final_reciprocal_values"] = std::move(last);
  }
  return doc;
}

}  // namespace pathwager

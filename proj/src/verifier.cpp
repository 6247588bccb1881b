#include "pathwager/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pathwager/simulator.hpp"

namespace pathwager {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Index idx(NodeId i) { return static_cast<Eigen::Index>(i); }

std::string format(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

// Multiplier on the fortune when the chooser takes j and the guesser named k.
double round_multiplier(std::size_t n, double wager, bool correct) {
  return apply_payoff(1.0, n, wager, correct);
}

double grid_point(std::size_t g, std::size_t points) {
  return static_cast<double>(g) / static_cast<double>(points - 1);
}

void check_distribution(Certificate& cert, const std::string& name, std::span<const double> probs) {
  double sum = 0.0;
  double negative = 0.0;
  for (double p : probs) {
    sum += p;
    negative = std::min(negative, p);
  }
  const double err = std::max(std::abs(sum - 1.0), -negative);
  cert.add({name + " is a distribution", err <= 1e-12, err, 1e-12, ""});
}

// Saddle checks for one fan; `prefix` names the node in check labels.
void fan_checks(Certificate& cert, std::span<const double> leaf, std::span<const double> chooser,
                std::span<const double> guesser, double wager, std::size_t grid,
                const std::string& prefix) {
  const std::size_t n = leaf.size();
  if (n == 0) throw SolveError("fan needs at least one leaf");
  if (chooser.size() != n || guesser.size() != n) {
    throw SolveError(prefix + "profile and leaf values differ in length");
  }
  if (grid < 2) throw SolveError("wager grid needs at least 2 points");
  check_distribution(cert, prefix + "chooser row", chooser);
  check_distribution(cert, prefix + "guesser row", guesser);
  cert.add({prefix + "wager in [0, 1]", wager >= 0.0 && wager <= 1.0, wager, 0.0, ""});

  const double h = solve_fan(leaf).root_value;
  cert.values.push_back(h);

  // (a) every chooser move is worth H against the guesser profile.
  double indifference = 0.0;
  double chooser_gain = -kInf;
  double identity = 0.0;
  double profile_value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m += guesser[k] * round_multiplier(n, wager, j == k);
    const double e = leaf[j] * m;
    indifference = std::max(indifference, std::abs(e - h) / h);
    chooser_gain = std::max(chooser_gain, (h - e) / h);
    identity += e / leaf[j];
    profile_value += chooser[j] * e;
  }
  cert.add({prefix + "chooser indifference", indifference <= kGainTolerance, indifference, kGainTolerance,
            "max_j |E[F | C = j] - H| / H"});
  cert.add({prefix + "chooser deviation", chooser_gain <= kGainTolerance, chooser_gain, kGainTolerance, ""});
  const double value_err = std::abs(profile_value - h) / h;
  cert.add({prefix + "profile value", value_err <= kGainTolerance, value_err, kGainTolerance,
            "E[F] under the profile against H = " + format(h)});
  if (n >= 2) {
    const double err = std::abs(identity - static_cast<double>(n));
    cert.add({prefix + "sum identity", err <= 1e-12 * static_cast<double>(n), err, 1e-12 * static_cast<double>(n),
              "sum_j E[F | C = j] / v_j = n"});
  }

  // (b) no guess and grid wager beats H against the chooser profile.
  double guesser_gain = -kInf;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t g = 0; g < grid; ++g) {
      const double w = grid_point(g, grid);
      double e = 0.0;
      for (std::size_t j = 0; j < n; ++j) e += chooser[j] * leaf[j] * round_multiplier(n, w, j == k);
      guesser_gain = std::max(guesser_gain, (e - h) / h);
    }
  }
  cert.add({prefix + "guesser deviation", guesser_gain <= kGainTolerance, guesser_gain, kGainTolerance,
            "max over guesses and " + std::to_string(grid) + " wagers"});
  cert.chooser_gain = std::max(cert.chooser_gain, chooser_gain);
  cert.guesser_gain = std::max(cert.guesser_gain, guesser_gain);
}

// M^s by repeated squaring.
Eigen::MatrixXd matrix_power(Eigen::MatrixXd base, std::size_t s) {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(base.rows(), base.cols());
  while (s > 0) {
    if (s & 1u) result = result * base;
    s >>= 1u;
    if (s > 0) base = base * base;
  }
  return result;
}

}  // namespace

bool Certificate::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; }) &&
         chooser_gain <= kGainTolerance && guesser_gain <= kGainTolerance && residual <= kResidualTolerance;
}

void Certificate::add(CertificateCheck check) { checks.push_back(std::move(check)); }

Certificate certify_fan(std::span<const double> leaf_values, std::span<const double> chooser,
                        std::span<const double> guesser, double wager, std::size_t grid) {
  if (leaf_values.size() < 2) throw SolveError("certify_fan needs a fan with at least two leaves");
  for (double v : leaf_values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw SolveError("leaf values must be finite and positive");
  }
  Certificate cert;
  cert.chooser_gain = -kInf;
  cert.guesser_gain = -kInf;
  fan_checks(cert, leaf_values, chooser, guesser, wager, grid, "");
  return cert;
}

Certificate certify(const GameGraph& graph, const GameSolution& solution, const StrategyProfile& profile,
                    std::size_t grid) {
  validate_profile(graph, profile);
  if (static_cast<std::size_t>(solution.values.size()) != graph.size()) {
    throw SolveError("solution does not match the graph");
  }
  Certificate cert;
  cert.chooser_gain = -kInf;
  cert.guesser_gain = -kInf;
  const double d = solution.discount();
  for (NodeId i : graph.non_terminals()) {
    const auto succ = graph.successors(i);
    std::vector<double> leaf;
    for (NodeId j : succ) leaf.push_back(d * solution.values[idx(j)]);
    const std::string prefix = "node " + graph.label(i) + ": ";
    const auto guess = guess_distribution(profile, i);
    const std::size_t before = cert.values.size();
    fan_checks(cert, leaf, profile.chooser[i], guess, profile.wagers[i], grid, prefix);
    const double h = cert.values[before];
    cert.values.resize(before);
    const double v = solution.values[idx(i)];
    const double err = std::abs(h - v) / v;
    cert.add({prefix + "value equation", err <= kGainTolerance, err, kGainTolerance,
              "fan value " + format(h) + " against " + format(v)});
  }
  for (NodeId i = 0; i < graph.size(); ++i) cert.values.push_back(solution.values[idx(i)]);
  if (graph.non_terminals().empty()) {
    cert.chooser_gain = 0.0;
    cert.guesser_gain = 0.0;
  }

  const auto series = truncated_values(graph, solution, 400);
  const double scale = std::max(1e-300, solution.reciprocal_values.cwiseAbs().maxCoeff());
  cert.residual = series.residuals.back() / scale;
  cert.add({"truncation residual at s = 400", cert.residual <= kResidualTolerance, cert.residual,
            kResidualTolerance, "||u_s - u||_inf / ||u||_inf"});

  if (solution.graph_class.is_terminating() && !graph.non_terminals().empty()) {
    for (Side fixed : {Side::Guesser, Side::Chooser}) {
      const auto ex = exploit_search(graph, solution, profile, fixed, grid);
      double worst = -kInf;
      for (NodeId i : graph.non_terminals()) worst = std::max(worst, ex.gains[i] / solution.values[idx(i)]);
      const bool chooser_deviates = fixed == Side::Guesser;
      cert.add({chooser_deviates ? "whole-game chooser deviation" : "whole-game guesser deviation",
                worst <= kGainTolerance, worst, kGainTolerance, "best positional deviation over all nodes"});
      (chooser_deviates ? cert.chooser_gain : cert.guesser_gain) =
          std::max(chooser_deviates ? cert.chooser_gain : cert.guesser_gain, worst);
    }
  }
  return cert;
}

ValueBounds brute_force_value(const GameGraph& graph, std::size_t grid, std::size_t depth) {
  const auto cls = classify(graph);
  if (!cls.is_terminating()) {
    throw SolveError("brute force needs a terminating graph (" + describe(cls) + ")");
  }
  if (grid < 2) throw SolveError("wager grid needs at least 2 points");
  const std::size_t n = graph.size();
  double floor_value = kInf;
  for (NodeId t : graph.terminals()) floor_value = std::min(floor_value, graph.terminal_value(t));

  std::vector<double> lower(n, floor_value), upper(n, kInf);
  for (NodeId t : graph.terminals()) lower[t] = upper[t] = graph.terminal_value(t);
  const auto non_terminals = graph.non_terminals();

  for (std::size_t level = 0; level < depth; ++level) {
    auto next_lower = lower;
    auto next_upper = upper;
    for (NodeId i : non_terminals) {
      const auto succ = graph.successors(i);
      const std::size_t k = succ.size();
      std::vector<double> lo, up;
      for (NodeId j : succ) {
        lo.push_back(lower[j]);
        up.push_back(upper[j]);
      }

      // Upper: chooser commits to p ~ 1/up, guesser best-responds on the grid.
      double inv_sum = 0.0;
      for (double c : up) inv_sum += 1.0 / c;
      if (inv_sum == 0.0) {
        next_upper[i] = kInf;
      } else {
        double best = -kInf;
        for (std::size_t guess = 0; guess < k; ++guess) {
          for (std::size_t g = 0; g < grid; ++g) {
            const double w = grid_point(g, grid);
            double e = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
              if (std::isinf(up[j])) continue;
              e += (1.0 / up[j] / inv_sum) * up[j] * round_multiplier(k, w, j == guess);
            }
            best = std::max(best, e);
          }
        }
        next_upper[i] = best;
      }

      // Lower: guesser commits to the grid wager at or above the critical
      // wager with the matching guess, chooser best-responds.
      std::vector<double> guess(k, 1.0 / static_cast<double>(k));
      double w = 1.0;
      if (k >= 2) {
        const double h = solve_fan(lo).root_value;
        const double wc = 1.0 - h / *std::max_element(lo.begin(), lo.end());
        const double steps = static_cast<double>(grid - 1);
        w = std::min(1.0, std::ceil(std::max(0.0, wc) * steps - 1e-9) / steps);
        if (w < wc) w = std::min(1.0, w + 1.0 / steps);
        if (w > 0.0) {
          double total = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            guess[j] = std::max(0.0, (h / lo[j] - (1.0 - w)) / (static_cast<double>(k) * w));
            total += guess[j];
          }
          for (double& g : guess) g /= total;
        }
      }
      double worst = kInf;
      for (std::size_t j = 0; j < k; ++j) {
        double m = 0.0;
        for (std::size_t q = 0; q < k; ++q) m += guess[q] * round_multiplier(k, w, j == q);
        worst = std::min(worst, lo[j] * m);
      }
      next_lower[i] = worst;
    }
    lower = std::move(next_lower);
    upper = std::move(next_upper);
  }

  ValueBounds out;
  out.lower = std::move(lower);
  out.upper = std::move(upper);
  out.censored.resize(n);
  for (NodeId i = 0; i < n; ++i) out.censored[i] = std::isinf(out.upper[i]);
  out.depth = depth;
  out.grid = grid;
  return out;
}

Certificate audit_convergence(const GameGraph& graph, const GameSolution& solution, std::size_t steps) {
  const auto pm = build_propagation_matrix(graph);
  Certificate cert;
  for (NodeId i = 0; i < graph.size(); ++i) cert.values.push_back(solution.values[idx(i)]);
  const auto n = static_cast<Eigen::Index>(graph.size());
  Eigen::MatrixXd limit = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd power;
  std::string what;

  if (solution.graph_class.is_terminating()) {
    const Eigen::MatrixXd a = pm.block_a();
    const auto nt = a.rows();
    const Eigen::MatrixXd nb =
        Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(nt, nt) - a).solve(pm.block_b());
    for (std::size_t r = 0; r < pm.non_terminal.size(); ++r) {
      for (std::size_t c = 0; c < pm.terminal.size(); ++c) {
        limit(idx(pm.non_terminal[r]), idx(pm.terminal[c])) =
            nb(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
    for (NodeId t : pm.terminal) limit(idx(t), idx(t)) = 1.0;
    power = matrix_power(pm.m, steps);
    what = "M^s against [[0, (I-A)^-1 B], [0, I]]";
  } else {
    if (!solution.spectral) throw SolveError("strongly connected audit needs spectral data");
    const auto& s = *solution.spectral;
    limit = s.x * s.y.transpose() / s.x.dot(s.y);
    power = matrix_power(pm.m / s.r, steps);
    const double min_entry = limit.minCoeff();
    cert.add({"limit matrix strictly positive", min_entry > 0.0, min_entry, 0.0, "smallest entry of x y^T / (x^T y)"});
    what = "r^-s M^s against x y^T / (x^T y)";
  }
  const double matrix_err = (power - limit).cwiseAbs().maxCoeff();
  cert.add({"matrix limit at s = " + std::to_string(steps), matrix_err <= kResidualTolerance, matrix_err,
            kResidualTolerance, what});

  const auto series = truncated_values(graph, solution, steps);
  const double value_err = series.residuals.back();
  cert.add({"value limit at s = " + std::to_string(steps), value_err <= kResidualTolerance, value_err,
            kResidualTolerance, "||u_s - u||_inf"});
  cert.residual = std::max(matrix_err, value_err);
  return cert;
}

nlohmann::json certificate_to_json(const Certificate& certificate) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : certificate.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"tolerance", c.tolerance},
                      {"detail", c.detail}});
  }
  return {{"pass", certificate.pass()},
          {"values", certificate.values},
          {"chooser_gain", certificate.chooser_gain},
          {"guesser_gain", certificate.guesser_gain},
          {"residual", certificate.residual},
          {"checks", std::move(checks)}};
}

nlohmann::json bounds_to_json(const GameGraph& graph, const ValueBounds& bounds) {
  auto nodes = nlohmann::json::object();
  for (NodeId i = 0; i < graph.size(); ++i) {
    nlohmann::json upper = std::isinf(bounds.upper[i]) ? nlohmann::json("inf") : nlohmann::json(bounds.upper[i]);
    nodes[graph.label(i)] = {{"lower", bounds.lower[i]}, {"upper", upper}, {"censored", static_cast<bool>(bounds.censored[i])}};
  }
  return {{"depth", bounds.depth}, {"grid", bounds.grid}, {"bounds", std::move(nodes)}};
}

}  // namespace pathwager

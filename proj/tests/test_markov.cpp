#include <gtest/gtest.h>

#include <cmath>

#include "corpus.hpp"
#include "pathwager/markov.hpp"
#include "pathwager/oracle.hpp"

using namespace pathwager;
using namespace pathwager::testkit;

TEST(Stopping, FanStopsInOneStep) {
  const auto g = make_fan({2, 4});
  const auto sol = solve(g);
  const auto an = stopping_analysis(sol, g, 5);
  ASSERT_EQ(an.non_terminal.size(), 1u);
  EXPECT_NEAR(an.tau[0], 1.0, 1e-15);
  EXPECT_NEAR(an.stop_dist(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(an.stop_dist(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(an.terminal_probs(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(an.terminal_probs(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(an.tail_mass[0], 0.0, 1e-15);
}

TEST(Stopping, LoopGraphIsGeometric) {
  const auto g = make_loop_graph();
  const auto sol = solve(g);
  const auto an = stopping_analysis(sol, g, 40);
  EXPECT_NEAR(an.tau[0], 2.0, 1e-12);
  for (Eigen::Index t = 0; t < 10; ++t) EXPECT_NEAR(an.stop_dist(t, 0), std::pow(0.5, static_cast<double>(t + 1)), 1e-15);
  EXPECT_NEAR(an.tail_mass[0], std::pow(0.5, 40), 1e-15);
}

TEST(Stopping, SeriesAgreesWithTauAndRho) {
  for (const auto& entry : terminating_corpus()) {
    const auto sol = solve(entry.graph);
    const auto an = stopping_analysis(sol, entry.graph, 2000);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(an.tau.size());
    for (Eigen::Index t = 0; t < an.stop_dist.rows(); ++t) mean += static_cast<double>(t + 1) * an.stop_dist.row(t).transpose();
    EXPECT_LT((mean - an.tau).cwiseAbs().maxCoeff(), 1e-6) << entry.name;
    EXPECT_LT((an.terminal_probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10) << entry.name;
    EXPECT_GE(an.stop_dist.minCoeff(), -1e-15) << entry.name;
  }
}

TEST(Stopping, ExpectedFinalFortuneEqualsValue) {
  for (const auto& entry : terminating_corpus()) {
    const auto sol = solve(entry.graph);
    const auto an = stopping_analysis(sol, entry.graph);
    const auto ef = expected_final_fortune(sol, entry.graph, an);
    EXPECT_LT(((ef - sol.values).array().abs() / sol.values.array()).maxCoeff(), 1e-10) << entry.name;
  }
}

TEST(Stopping, RequiresTerminatingGraph) {
  const auto g = build_window_game(3, 1);
  EXPECT_THROW(stopping_analysis(solve(g), g), SolveError);
  const auto f = make_fan({2, 4});
  EXPECT_THROW(stopping_analysis(solve(f), f, 0), SolveError);
  EXPECT_THROW(invariant_measure(solve(f)), SolveError);
}

TEST(Fairness, Examples) {
  auto g = make_fan({1, 1});
  auto verdict = fairness_check(solve(g), g);
  EXPECT_TRUE(verdict.fair);
  EXPECT_TRUE(verdict.value_fair);

  g = make_fan({2, 4});
  verdict = fairness_check(solve(g), g);
  EXPECT_FALSE(verdict.fair);
  EXPECT_FALSE(verdict.value_fair);
  EXPECT_NE(verdict.reason.find("terminal"), std::string::npos);

  g = make_fan({1});
  verdict = fairness_check(solve(g), g);
  EXPECT_FALSE(verdict.fair);
  EXPECT_NE(verdict.reason.find("out-degree 1"), std::string::npos);

  g = build_window_game(3, 1);
  const auto sol = solve(g);
  verdict = fairness_check(sol, g);
  EXPECT_FALSE(verdict.fair);
  EXPECT_LT(sol.spectral->r, 1.0);
  EXPECT_TRUE(verdict.consistent());

  const auto full = parse_graph(R"({"nodes":["a","b"],"edges":[["a","a"],["a","b"],["b","a"],["b","b"]]})");
  verdict = fairness_check(solve(full), full);
  EXPECT_TRUE(verdict.fair);
  EXPECT_TRUE(verdict.value_fair);
}

TEST(Fairness, RandomCorpusVerdictsAgree) {
  for (const auto& entry : random_fairness_corpus()) {
    const auto verdict = fairness_check(solve(entry.graph), entry.graph);
    EXPECT_TRUE(verdict.consistent()) << entry.name << ": " << verdict.reason;
  }
}

TEST(Invariant, WindowGameClosedForm) {
  for (std::size_t n = 2; n <= 8; ++n) {
    const auto g = build_window_game(n, 1);
    const auto mu = invariant_measure(solve(g));
    const auto ref = gn1_reference(n);
    EXPECT_LT((mu - ref.mu).cwiseAbs().maxCoeff(), 1e-10) << n;
    EXPECT_NEAR(mu.sum(), 1.0, 1e-14);
  }
}

TEST(Invariant, StationaryForTransitionMatrix) {
  for (const auto& entry : strongly_connected_corpus()) {
    const auto sol = solve(entry.graph);
    const auto mu = invariant_measure(sol);
    const auto p = chooser_transition_matrix(sol, entry.graph);
    EXPECT_LT((p.transpose() * mu - mu).cwiseAbs().maxCoeff(), 1e-10) << entry.name;
  }
}

TEST(SteadyState, ShapeAndScaleEstimate) {
  const auto g = build_window_game(3, 1);
  const auto sol = solve(g);
  const auto plain = steady_state_fortunes(sol, g);
  EXPECT_NEAR(plain.shape.sum(), 1.0, 1e-14);
  EXPECT_FALSE(plain.c_estimate.has_value());

  SimulationConfig config{g, build_profile(sol, g, 1.0)};
  config.replications = 40000;
  config.max_steps = 120;
  config.checkpoints = {120};
  config.discount = sol.discount();
  config.seed = 17;
  const auto mc = run(config);
  const auto ss = steady_state_fortunes(sol, g, &mc);
  ASSERT_TRUE(ss.c_estimate.has_value());
  EXPECT_GT(*ss.c_estimate, 0.0);
  // Each joint mean E[D_t 1{X_t = j}] is c times the shape.
  const auto& cp = mc.checkpoints.back();
  for (NodeId j = 0; j < g.size(); ++j) {
    const double predicted = *ss.c_estimate * ss.shape[static_cast<Eigen::Index>(j)];
    const double se = std::hypot(cp.joint_std_error[j], *ss.c_std_error * ss.shape[static_cast<Eigen::Index>(j)]);
    EXPECT_LE(std::abs(cp.joint_mean[j] - predicted), 4.0 * se) << g.label(j);
  }
  // The conditional mean of D_t given X_t = j scales like 1 / v_j.
  for (NodeId j = 0; j < g.size(); ++j) {
    const double cond = cp.joint_mean[j] * static_cast<double>(config.replications) / static_cast<double>(cp.occupancy[j]);
    const double scaled = cond * sol.values[static_cast<Eigen::Index>(j)];
    const double ref = cp.joint_mean[0] * static_cast<double>(config.replications) / static_cast<double>(cp.occupancy[0]) *
                       sol.values[0];
    EXPECT_NEAR(scaled / ref, 1.0, 0.1) << g.label(j);
  }
}

TEST(Report, JsonAndCsv) {
  const auto g = build_stopping_variant(3);
  const auto sol = solve(g);
  const auto report = analyze(sol, g, 10);
  const auto doc = markov_report_to_json(g, report);
  EXPECT_NEAR(doc["terminal_probabilities"]["1"]["stop"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(doc.contains("expected_stopping_time"));
  EXPECT_TRUE(doc["fairness"]["consistent"].get<bool>());
  const auto csv = stopping_distribution_csv(g, *report.stopping);
  EXPECT_EQ(csv.rfind("t,1,2,3\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);

  const auto w = build_window_game(2, 1);
  const auto wdoc = markov_report_to_json(w, analyze(solve(w), w));
  EXPECT_TRUE(wdoc.contains("invariant_measure"));
  EXPECT_TRUE(wdoc.contains("steady_state_shape"));
}

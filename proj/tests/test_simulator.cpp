#include <gtest/gtest.h>

#include <cmath>

#include "corpus.hpp"
#include "pathwager/markov.hpp"
#include "pathwager/oracle.hpp"
#include "pathwager/simulator.hpp"

using namespace pathwager;
using namespace pathwager::testkit;

namespace {

SimulationConfig optimal_config(const GameGraph& g, double beta, std::size_t reps, std::uint64_t seed) {
  const auto sol = solve(g);
  SimulationConfig c{g, build_profile(sol, g, beta)};
  if (const auto root = tree_root(g)) c.start_node = *root;
  c.replications = reps;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Payoff, OddsWeightedRule) {
  EXPECT_DOUBLE_EQ(apply_payoff(1.0, 2, 1.0 / 3.0, true), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(apply_payoff(1.0, 2, 1.0 / 3.0, false), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(apply_payoff(2.0, 3, 0.5, true), 4.0);
  EXPECT_DOUBLE_EQ(apply_payoff(2.0, 3, 0.5, false), 1.0);
  EXPECT_DOUBLE_EQ(apply_payoff(3.0, 1, 1.0, true), 6.0);
  EXPECT_DOUBLE_EQ(apply_payoff(3.0, 4, 0.0, false), 3.0);
}

TEST(Rng, UniformRangeAndSampling) {
  ReplicationRng rng(1, 2);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  const std::vector<double> point{0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.sample(point), 1u);
  ReplicationRng a(7, 3), b(7, 3), c(7, 4);
  EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_NE(a.uniform(), c.uniform());
}

TEST(PlayStep, Fan24EveryChoiceGivesHarmonicMean) {
  const auto g = make_fan({2, 4});
  const auto sol = solve(g);
  const auto prof = build_profile(sol, g, 1.0);
  ReplicationRng rng(3, 0);
  for (int i = 0; i < 200; ++i) {
    const auto step = play_step(g, prof, 0, 1.0, rng);
    EXPECT_NEAR(step.next_fortune * g.terminal_value(step.next_node), 8.0 / 3.0, 1e-12);
  }
  const auto ex = exploit_search(g, sol, prof, Side::Guesser);
  EXPECT_LE(ex.max_gain, 1e-12);
  EXPECT_NEAR(ex.best_values[0], 8.0 / 3.0, 1e-12);
}

TEST(Simulate, DeterministicFortuneOnTwoLeafFan) {
  const auto result = run(optimal_config(make_fan({2, 4}), 1.0, 10000, 9));
  EXPECT_EQ(result.completed, 10000u);
  EXPECT_NEAR(result.min_fortune, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(result.max_fortune, 8.0 / 3.0, 1e-12);
}

TEST(Simulate, FairFanMeanIsOne) {
  const auto result = run(optimal_config(make_fan({1, 1}), 1.0, 10000, 10));
  EXPECT_LE(std::abs(result.mean_fortune - 1.0), std::max(3.0 * result.fortune_std_error, 1e-12));
}

TEST(Simulate, MaxRiskMeanMatchesValue) {
  const auto g = make_fan({1, 2, 3});
  const auto result = run(optimal_config(g, 0.0, 100000, 11));
  const double v = solve(g).values[0];
  EXPECT_LE(std::abs(result.mean_fortune - v), 3.0 * result.fortune_std_error);
  EXPECT_GT(result.fortune_std_error, 0.0);
}

TEST(Simulate, StoppingVariantMatchesMarkovAnalysis) {
  const auto g = build_stopping_variant(4);
  const auto sol = solve(g);
  auto config = optimal_config(g, 1.0, 100000, 12);
  const auto result = run(config);
  const auto an = stopping_analysis(sol, g);
  EXPECT_LE(std::abs(result.mean_fortune - sol.values[0]), std::max(3.0 * result.fortune_std_error, 1e-9));
  EXPECT_LE(std::abs(result.mean_steps - an.tau[0]), 3.0 * result.steps_std_error);
  std::size_t total = 0;
  for (auto c : result.steps_histogram) total += c;
  EXPECT_EQ(total, result.completed);
  // q_1 from node 1 against the fraction stopping after one step.
  const double q1 = an.stop_dist(0, 0);
  const double freq = static_cast<double>(result.steps_histogram[1]) / static_cast<double>(result.completed);
  EXPECT_LE(std::abs(freq - q1), 3.0 * std::sqrt(q1 * (1.0 - q1) / static_cast<double>(result.completed)));
}

TEST(Simulate, ReproducibleAcrossThreadCounts) {
  auto config = optimal_config(build_stopping_variant(3), 0.5, 2000, 42);
  config.threads = 1;
  const auto a = run(config);
  config.threads = 4;
  const auto b = run(config);
  ASSERT_EQ(a.replications.size(), b.replications.size());
  for (std::size_t r = 0; r < a.replications.size(); ++r) {
    EXPECT_EQ(a.replications[r].final_fortune, b.replications[r].final_fortune);
    EXPECT_EQ(a.replications[r].steps, b.replications[r].steps);
  }
  config.seed = 43;
  const auto c = run(config);
  EXPECT_NE(a.mean_fortune, c.mean_fortune);
}

TEST(Simulate, CensoringIsReported) {
  auto config = optimal_config(make_loop_graph(), 1.0, 1000, 1);
  config.max_steps = 1;
  const auto result = run(config);
  EXPECT_GT(result.censored, 300u);
  EXPECT_EQ(result.completed + result.censored, 1000u);
  ASSERT_FALSE(result.warnings.empty());
  EXPECT_NE(result.warnings[0].find("censoring"), std::string::npos);
}

TEST(Simulate, DiscountedFortuneStableAcrossCheckpoints) {
  const auto g = build_window_game(2, 1);
  const auto sol = solve(g);
  auto config = optimal_config(g, 1.0, 100000, 5);
  config.max_steps = 100;
  config.discount = sol.discount();
  config.checkpoints = {50, 100};
  const auto result = run(config);
  ASSERT_EQ(result.checkpoints.size(), 2u);
  const auto& a = result.checkpoints[0];
  const auto& b = result.checkpoints[1];
  EXPECT_LE(std::abs(a.mean - b.mean), 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST(Simulate, OccupancyMatchesInvariantMeasure) {
  const auto g = build_window_game(3, 1);
  const auto sol = solve(g);
  auto config = optimal_config(g, 1.0, 20000, 8);
  config.max_steps = 200;
  config.discount = sol.discount();
  const auto result = run(config);
  const auto mu = invariant_measure(sol);
  const auto reps = static_cast<double>(config.replications);
  for (NodeId j = 0; j < g.size(); ++j) {
    const double m = mu[static_cast<Eigen::Index>(j)];
    const double freq = static_cast<double>(result.checkpoints.back().occupancy[j]) / reps;
    EXPECT_LE(std::abs(freq - m), 3.0 * std::sqrt(m * (1.0 - m) / reps)) << g.label(j);
  }
}

TEST(Simulate, RejectsBadConfigurations) {
  auto config = optimal_config(make_fan({2, 4}), 1.0, 10, 1);
  config.start_node = 1;
  EXPECT_THROW(run(config), SolveError);
  config.start_node = 0;
  config.replications = 0;
  EXPECT_THROW(run(config), SolveError);
  config.replications = 10;
  config.profile.wagers[0] = 2.0;
  EXPECT_THROW(run(config), SolveError);
  const auto periodic = parse_graph(R"({"nodes":["a","b"],"edges":[["a","b"],["b","a"]]})");
  SimulationConfig bad{periodic, {}};
  EXPECT_THROW(run(bad), SolveError);
}

TEST(Simulate, CsvAndJsonReports) {
  const auto g = make_fan({2, 4});
  const auto result = run(optimal_config(g, 1.0, 5, 1));
  const auto csv = replications_to_csv(g, result);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(csv.rfind("replication,final_fortune", 0), 0u);
  const auto doc = simulation_to_json(g, result);
  EXPECT_EQ(doc["completed"], 5);
  EXPECT_NEAR(doc["mean_fortune"].get<double>(), 8.0 / 3.0, 1e-12);
}

TEST(Exploit, BadGuesserIsPunished) {
  const auto g = make_fan({2, 4});
  const auto sol = solve(g);
  auto prof = build_profile(sol, g, 1.0);
  prof.guesser[0] = {1.0, 0.0};
  prof.wagers[0] = 0.9;
  const auto ex = exploit_search(g, sol, prof, Side::Guesser);
  EXPECT_NEAR(ex.best_values[0], 0.4, 1e-12);
  EXPECT_EQ(ex.deviation_choice[0], 1u);
  EXPECT_GT(ex.max_gain, 2.0);
}

TEST(Exploit, EquilibriumHasNoProfitableDeviation) {
  for (const auto& entry : terminating_corpus()) {
    const auto sol = solve(entry.graph);
    for (double beta : {0.0, 0.5, 1.0}) {
      const auto prof = build_profile(sol, entry.graph, beta);
      for (Side side : {Side::Guesser, Side::Chooser}) {
        const auto ex = exploit_search(entry.graph, sol, prof, side);
        for (NodeId i : entry.graph.non_terminals()) {
          EXPECT_LE(ex.gains[i], 1e-9 * sol.values[static_cast<Eigen::Index>(i)]) << entry.name << " beta " << beta;
        }
      }
    }
  }
}

TEST(Exploit, PerturbedChooserIsExploited) {
  const auto g = make_fan({1, 2, 3});
  const auto sol = solve(g);
  auto prof = build_profile(sol, g, 1.0);
  prof.chooser[0][0] += 0.01;
  prof.chooser[0][2] -= 0.01;
  const auto ex = exploit_search(g, sol, prof, Side::Chooser);
  EXPECT_GT(ex.max_gain, 1e-4);
  EXPECT_EQ(ex.deviation_choice[0], 0u);
  EXPECT_DOUBLE_EQ(ex.deviation_wager[0], 1.0);
}

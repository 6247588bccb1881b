#include <gtest/gtest.h>

#include "corpus.hpp"
#include "pathwager/oracle.hpp"
#include "pathwager/strategy.hpp"

using namespace pathwager;
using namespace pathwager::testkit;

TEST(GuesserResponse, BetaFamilyOnFan24) {
  const std::vector<double> p{2.0 / 3.0, 1.0 / 3.0};
  auto r = optimal_guesser_response(p, 1.0);
  EXPECT_NEAR(r.wager, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.guess[0], 1.0, 1e-15);
  EXPECT_NEAR(r.guess[1], 0.0, 1e-15);

  r = optimal_guesser_response(p, 0.0);
  EXPECT_DOUBLE_EQ(r.wager, 1.0);
  EXPECT_NEAR(r.guess[0], 2.0 / 3.0, 1e-15);

  r = optimal_guesser_response(p, 0.5);
  EXPECT_NEAR(r.wager, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.guess[0], 0.75, 1e-15);
  EXPECT_NEAR(r.guess[1], 0.25, 1e-15);
}

TEST(GuesserResponse, DegenerateCases) {
  const std::vector<double> uniform{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const auto r = optimal_guesser_response(uniform, 1.0);
  EXPECT_LE(r.wager, kZeroWager);
  for (double g : r.guess) EXPECT_NEAR(g, 1.0 / 3.0, 1e-15);

  const std::vector<double> single{1.0};
  for (double beta : {0.0, 0.5, 1.0}) {
    const auto s = optimal_guesser_response(single, beta);
    EXPECT_DOUBLE_EQ(s.wager, 1.0);
    EXPECT_DOUBLE_EQ(s.guess[0], 1.0);
  }
  const std::vector<double> p{0.5, 0.5};
  EXPECT_THROW(optimal_guesser_response(p, -0.1), SolveError);
  EXPECT_THROW(optimal_guesser_response(p, 1.5), SolveError);
  EXPECT_THROW(optimal_guesser_response(std::vector<double>{}, 1.0), SolveError);
}

TEST(GuesserResponse, CriticalWager) {
  const std::vector<double> leaves{2.0, 4.0};
  EXPECT_NEAR(critical_wager(leaves), 1.0 / 3.0, 1e-15);
  const std::vector<double> flat{3.0, 3.0};
  EXPECT_NEAR(critical_wager(flat), 0.0, 1e-15);
}

TEST(Profile, FanProfileAtEveryBeta) {
  const auto g = make_fan({2, 4});
  const auto sol = solve(g);
  for (double beta : {0.0, 0.25, 0.5, 1.0}) {
    const auto prof = build_profile(sol, g, beta);
    EXPECT_NEAR(prof.chooser[0][0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(prof.p_min[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(prof.wagers[0], 1.0 - 2.0 * beta / 3.0, 1e-12);
    EXPECT_TRUE(prof.chooser[1].empty());
    EXPECT_NO_THROW(validate_profile(g, prof));
  }
}

TEST(Profile, WindowGameOracleProbabilities) {
  const auto g = build_window_game(3, 1);
  const auto ref = gn1_reference(3);
  const auto prof = build_profile(solve(g), g, 1.0);
  // Node "1": truth edge to itself, lie edge to "2".
  ASSERT_EQ(g.edge_label(0, 0), "truth");
  EXPECT_NEAR(prof.chooser[0][0], ref.oracle_truth_prob, 1e-10);
  EXPECT_NEAR(prof.chooser[0][1], ref.oracle_lie_prob, 1e-10);
  EXPECT_NEAR(prof.wagers[0], ref.bettor_wager, 1e-10);
  EXPECT_DOUBLE_EQ(prof.wagers[1], 1.0);
}

TEST(Profile, RowsAreDistributionsOnCorpus) {
  for (const auto& entry : full_corpus()) {
    const auto sol = solve(entry.graph);
    for (double beta : {0.0, 0.5, 1.0}) {
      const auto prof = build_profile(sol, entry.graph, beta);
      EXPECT_NO_THROW(validate_profile(entry.graph, prof)) << entry.name;
      for (NodeId i : entry.graph.non_terminals()) {
        const auto g = guess_distribution(prof, i);
        double total = 0.0;
        for (double x : g) total += x;
        EXPECT_NEAR(total, 1.0, 1e-12) << entry.name;
      }
    }
  }
}

TEST(Profile, FromChooserRows) {
  const auto g = make_fan({2, 4});
  const auto prof = profile_from_chooser(g, {{0.5, 0.5}, {}, {}}, 1.0);
  EXPECT_NEAR(prof.wagers[0], 0.0, 1e-15);
  EXPECT_THROW(profile_from_chooser(g, {{0.5, 0.5}}, 1.0), SolveError);
  EXPECT_THROW(profile_from_chooser(g, {{1.0}, {}, {}}, 1.0), SolveError);
}

TEST(Profile, ValidationAndGuessClamping) {
  const auto g = make_fan({2, 4});
  auto prof = build_profile(solve(g), g, 1.0);
  prof.guesser[0] = {1.0 + 5e-13, -5e-13};
  const auto clamped = guess_distribution(prof, 0);
  EXPECT_DOUBLE_EQ(clamped[0], 1.0);
  EXPECT_DOUBLE_EQ(clamped[1], 0.0);
  prof.guesser[0] = {1.1, -0.1};
  EXPECT_THROW(guess_distribution(prof, 0), SolveError);
  EXPECT_THROW(guess_distribution(prof, 1), SolveError);

  auto bad = build_profile(solve(g), g, 1.0);
  bad.chooser[0] = {0.7, 0.7};
  EXPECT_THROW(validate_profile(g, bad), SolveError);
  bad = build_profile(solve(g), g, 1.0);
  bad.wagers[0] = 1.5;
  EXPECT_THROW(validate_profile(g, bad), SolveError);
}

TEST(Profile, JsonRoundTrip) {
  const auto g = build_stopping_variant(4);
  const auto prof = build_profile(solve(g), g, 0.5);
  const auto back = profile_from_json(g, profile_to_json(g, prof));
  EXPECT_EQ(back.chooser, prof.chooser);
  EXPECT_EQ(back.guesser, prof.guesser);
  EXPECT_EQ(back.wagers, prof.wagers);
  EXPECT_DOUBLE_EQ(back.beta, 0.5);
  EXPECT_THROW(profile_from_json(g, nlohmann::json::object()), SolveError);
}

TEST(TransitionMatrix, StochasticWithTerminalLoops) {
  for (const auto& entry : full_corpus()) {
    const auto sol = solve(entry.graph);
    const auto p = chooser_transition_matrix(sol, entry.graph);
    // Spectral solutions carry the eigenvector error of the power iteration.
    const double tol = sol.spectral ? 1e-10 : 1e-12;
    EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), tol) << entry.name;
    EXPECT_GE(p.minCoeff(), 0.0);
    for (NodeId t : entry.graph.terminals()) {
      EXPECT_DOUBLE_EQ(p(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)), 1.0);
    }
    const auto prof = build_profile(sol, entry.graph, 1.0);
    for (NodeId i : entry.graph.non_terminals()) {
      const auto succ = entry.graph.successors(i);
      for (std::size_t k = 0; k < succ.size(); ++k) {
        EXPECT_NEAR(p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(succ[k])), prof.chooser[i][k], tol);
      }
    }
  }
}

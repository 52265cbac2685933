#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "art/core_model.hpp"
#include "test_support.hpp"

using art::ObservationMatrix;
using art::SocialGraph;
using art::ViolationKind;
using art::testing::matrix_from_rows;

TEST(Validate, ConsistentDatasetHasEmptyReport) {
  const auto obs = matrix_from_rows({{1, 2}, {2, 0}, {1, 1}}, 2);
  const SocialGraph g(3, {{0, 1}, {1, 2}});
  const auto report = art::validate(obs, g);
  EXPECT_TRUE(report.ok());
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Validate, StateAboveRangeIsReported) {
  const ObservationMatrix obs(2, 1, 2, {{0, 0, 0}, {1, 0, 2}});  // state R+1 in 1-based terms
  const auto report = art::validate(obs, SocialGraph(2, {}));
  EXPECT_TRUE(report.has(ViolationKind::kStateOutOfRange));
  EXPECT_NE(report.violations.front().message.find("state out of range"), std::string::npos);
}

TEST(Validate, EventWithoutObserversIsReported) {
  const auto obs = matrix_from_rows({{1, 0}, {2, 0}}, 2);
  const auto report = art::validate(obs, SocialGraph(2, {}));
  EXPECT_TRUE(report.has(ViolationKind::kUnobservedEvent));
  EXPECT_NE(report.violations.front().message.find("unobserved event"), std::string::npos);
}

TEST(Validate, GraphProblemsAreReported) {
  const auto obs = matrix_from_rows({{1}, {2}}, 2);
  EXPECT_TRUE(art::validate(obs, SocialGraph(3, {})).has(ViolationKind::kDimensionMismatch));
  EXPECT_TRUE(art::validate(obs, SocialGraph(2, {{1, 1}})).has(ViolationKind::kSelfLoop));
  EXPECT_TRUE(art::validate(obs, SocialGraph(2, {{0, 5}})).has(ViolationKind::kEndpointOutOfRange));
  EXPECT_TRUE(art::validate(ObservationMatrix(1, 1, 1, {{0, 0, 0}}), SocialGraph(1, {})).has(ViolationKind::kBadShape));
}

TEST(Validate, IdleAgentIsAWarningNotAViolation) {
  const auto obs = matrix_from_rows({{1, 2}, {0, 0}}, 2);
  const auto report = art::validate(obs, SocialGraph(2, {}));
  EXPECT_TRUE(report.ok());
  EXPECT_TRUE(report.warns(ViolationKind::kIdleAgent));
}

TEST(ObservationMatrixTest, RejectsDuplicatesAndOutOfBoundsCells) {
  EXPECT_THROW(ObservationMatrix(2, 2, 2, {{0, 0, 0}, {0, 0, 1}}), art::Error);
  EXPECT_THROW(ObservationMatrix(2, 2, 2, {{2, 0, 0}}), art::Error);
}

TEST(SocialGraphTest, SymmetricAndDeduplicated) {
  const SocialGraph g(3, {{1, 0}, {0, 1}, {2, 1}});
  EXPECT_EQ(g.n_edges(), 2u);
  EXPECT_TRUE(g.connected(0, 1));
  EXPECT_TRUE(g.connected(1, 0));
  EXPECT_TRUE(g.connected(1, 2));
  EXPECT_FALSE(g.connected(0, 2));
}

TEST(MvPrior, Unanimity) {
  const auto obs = matrix_from_rows({{2}, {2}, {2}}, 4);
  const auto p = art::mv_prior(obs);
  EXPECT_EQ(p.row(0), Eigen::RowVector4d(0, 1, 0, 0));
}

TEST(MvPrior, TwoToOneSplit) {
  const auto obs = matrix_from_rows({{1}, {1}, {3}}, 4);
  const auto p = art::mv_prior(obs);
  EXPECT_DOUBLE_EQ(p(0, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(p(0, 2), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(p(0, 3), 0.0);
}

TEST(MvPrior, SingleObserverIsOneHot) {
  const auto obs = matrix_from_rows({{0}, {3}, {0}}, 4);
  EXPECT_EQ(art::mv_prior(obs).row(0), Eigen::RowVector4d(0, 0, 1, 0));
}

TEST(MvPrior, UnobservedEventIsAnError) {
  EXPECT_THROW(art::mv_prior(matrix_from_rows({{1, 0}}, 2)), art::Error);
}

TEST(MvPrior, RowsAreDistributionsOnRandomData) {
  art::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto obs = art::testing::random_matrix(7, 9, 3, rng, 0.5);
    const auto p = art::mv_prior(obs);
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      EXPECT_NEAR(p.row(j).sum(), 1.0, 1e-9);
      EXPECT_GE(p.row(j).minCoeff(), 0.0);
    }
  }
}

TEST(MvPrior, PermutationEquivariance) {
  art::Rng rng(5);
  const auto obs = art::testing::random_matrix(6, 8, 4, rng, 0.3);
  const auto base = art::mv_prior(obs);

  std::vector<std::size_t> agents(6);
  std::iota(agents.begin(), agents.end(), 0);
  std::shuffle(agents.begin(), agents.end(), rng.engine());
  const std::vector<int> relabel{2, 0, 3, 1};
  std::vector<art::Observation> agent_perm, state_perm;
  for (const auto& e : obs.entries()) {
    agent_perm.push_back({agents[e.agent], e.event, e.state});
    state_perm.push_back({e.agent, e.event, relabel[static_cast<std::size_t>(e.state)]});
  }
  EXPECT_EQ(art::mv_prior(ObservationMatrix(6, 8, 4, agent_perm)), base);
  const auto permuted = art::mv_prior(ObservationMatrix(6, 8, 4, state_perm));
  for (int r = 0; r < 4; ++r) EXPECT_EQ(permuted.col(relabel[static_cast<std::size_t>(r)]), base.col(r));
}

TEST(OneHot, RowExamples) {
  EXPECT_EQ(art::onehot_row(matrix_from_rows({{1, 0}}, 2), 0), Eigen::Vector4d(1, 0, 0, 0));
  EXPECT_EQ(art::onehot_row(matrix_from_rows({{3}}, 3), 0), Eigen::Vector3d(0, 0, 1));
  const auto idle = art::onehot_row(matrix_from_rows({{0, 0, 0}, {1, 1, 1}}, 2), 0);
  EXPECT_EQ(idle.size(), 6);
  EXPECT_EQ(idle.sum(), 0.0);
}

TEST(OneHot, ColumnExamples) {
  EXPECT_EQ(art::onehot_col(matrix_from_rows({{2}, {2}}, 2), 0), Eigen::Vector4d(0, 1, 0, 1));
  EXPECT_EQ(art::onehot_col(matrix_from_rows({{0}, {1}}, 2), 0), Eigen::Vector4d(0, 0, 1, 0));
  EXPECT_EQ(art::onehot_col(matrix_from_rows({{4}}, 4), 0), Eigen::Vector4d(0, 0, 0, 1));
}

TEST(OneHot, InjectiveOnDistinctRows) {
  // All 3^3 patterns over J=3, R=2 with nulls map to distinct vectors.
  std::vector<Eigen::VectorXd> seen;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const auto obs = matrix_from_rows({{a, b, c}, {1, 1, 1}}, 2);
        const auto x = art::onehot_row(obs, 0);
        for (const auto& y : seen) EXPECT_NE(x, y);
        seen.push_back(x);
      }
}

TEST(TruthEstimateTest, ArgmaxWithLowestIndexTies) {
  Eigen::MatrixXd conf(3, 3);
  conf << 0.2, 0.5, 0.3,  //
      1.0 / 3, 1.0 / 3, 1.0 / 3,  //
      0.1, 0.45, 0.45;
  const auto est = art::TruthEstimate::from_confidence(conf);
  EXPECT_EQ(est.states, (std::vector<int>{1, 0, 1}));
}

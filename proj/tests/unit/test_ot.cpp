#include <gtest/gtest.h>

#include "oracles/simplex.hpp"
#include "urlcomsum/ot.hpp"
#include "urlcomsum/rng.hpp"

using namespace urlcomsum;

namespace {

Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, 0.05, 1.0);
  return v / v.sum();
}

Eigen::MatrixXd random_cost(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, 0.0, 2.0);
  return m;
}

double max_marginal_error(const Eigen::MatrixXd& plan, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return std::max((plan.rowwise().sum() - p).cwiseAbs().maxCoeff(),
                  (plan.colwise().sum().transpose() - q).cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Transport, IdenticalMarginalsZeroDiagonal) {
  const Eigen::VectorXd p = (Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished();
  Eigen::MatrixXd c = (Eigen::MatrixXd(3, 3) << 0, 0.4, 1.1, 0.4, 0, 0.9, 1.1, 0.9, 0).finished();
  const OtResult e = exact_transport(p, p, c);
  EXPECT_NEAR(e.distance, 0.0, 1e-15);
  EXPECT_TRUE(e.plan.isApprox(Eigen::MatrixXd(p.asDiagonal())));
  const OtResult s = sinkhorn(p, p, c);
  EXPECT_NEAR(s.distance, 0.0, 1e-3);
  EXPECT_LT((s.plan - Eigen::MatrixXd(p.asDiagonal())).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Transport, SingleFeasiblePlan) {
  const Eigen::VectorXd p = (Eigen::VectorXd(2) << 1, 0).finished();
  const Eigen::VectorXd q = (Eigen::VectorXd(2) << 0, 1).finished();
  const Eigen::MatrixXd c = (Eigen::MatrixXd(2, 2) << 0, 0.7, 0.7, 0).finished();
  for (OtSolver solver : {OtSolver::exact, OtSolver::sinkhorn}) {
    const OtResult r = solve_transport(p, q, c, solver);
    EXPECT_NEAR(r.distance, 0.7, 1e-9) << to_string(solver);
    EXPECT_NEAR(r.plan(0, 1), 1.0, 1e-9) << to_string(solver);
  }
}

TEST(Transport, ExactMatchesLinearProgram) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const auto k = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const Eigen::VectorXd p = random_simplex(rng, r), q = random_simplex(rng, k);
    const Eigen::MatrixXd c = random_cost(rng, r, k);
    const OtResult e = exact_transport(p, q, c);
    const oracle::LpSolution lp = oracle::transport_lp(p, q, c);
    EXPECT_NEAR(e.distance, lp.value, 1e-9) << "trial " << trial;
    EXPECT_LE(max_marginal_error(e.plan, p, q), 1e-9);
    EXPECT_GE(e.plan.minCoeff(), 0.0);
    EXPECT_NEAR(e.distance, (e.plan.array() * c.array()).sum(), 1e-12);
  }
}

TEST(Transport, SinkhornCloseToExact) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const auto k = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const Eigen::VectorXd p = random_simplex(rng, r), q = random_simplex(rng, k);
    const Eigen::MatrixXd c = random_cost(rng, r, k);
    const OtResult s = sinkhorn(p, q, c);
    const OtResult e = exact_transport(p, q, c);
    EXPECT_LE(std::abs(s.distance - e.distance), 0.01) << "trial " << trial;
    EXPECT_GE(s.distance, e.distance - 1e-9);
    EXPECT_LE(max_marginal_error(s.plan, p, q), 1e-6);
    EXPECT_GE(s.plan.minCoeff(), 0.0);
  }
}

TEST(Transport, SymmetricUnderTranspose) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd p = random_simplex(rng, 4), q = random_simplex(rng, 5);
    const Eigen::MatrixXd c = random_cost(rng, 4, 5);
    EXPECT_NEAR(exact_transport(p, q, c).distance, exact_transport(q, p, c.transpose()).distance, 1e-12);
    EXPECT_NEAR(sinkhorn(p, q, c).distance, sinkhorn(q, p, c.transpose()).distance, 1e-3);
  }
}

TEST(Transport, ZeroMassEntriesAllowed) {
  const Eigen::VectorXd p = (Eigen::VectorXd(3) << 0.0, 0.6, 0.4).finished();
  const Eigen::VectorXd q = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
  const Eigen::MatrixXd c = (Eigen::MatrixXd(3, 2) << 0.1, 0.2, 0.3, 1.0, 0.8, 0.2).finished();
  const double expect = oracle::transport_lp(p, q, c).value;
  EXPECT_NEAR(exact_transport(p, q, c).distance, expect, 1e-12);
  EXPECT_NEAR(sinkhorn(p, q, c).distance, expect, 1e-2);
}

TEST(Transport, InvalidInputsRejected) {
  const Eigen::VectorXd p = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
  const Eigen::VectorXd q = (Eigen::VectorXd(2) << 0.7, 0.7).finished();
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_THROW(exact_transport(p, q, c), std::invalid_argument);
  c(0, 0) = -1.0;
  EXPECT_THROW(sinkhorn(p, p, c), std::invalid_argument);
  EXPECT_THROW(sinkhorn(p, p, Eigen::MatrixXd::Ones(3, 2)), std::invalid_argument);
}

TEST(Transport, NonConvergenceFlagged) {
  Rng rng(1);
  const Eigen::VectorXd p = random_simplex(rng, 6), q = random_simplex(rng, 6);
  const Eigen::MatrixXd c = random_cost(rng, 6, 6);
  SinkhornConfig cfg;
  cfg.max_iters = 1;
  cfg.epsilon_start = cfg.epsilon_end = 1e-3;
  const OtResult s = sinkhorn(p, q, c, cfg);
  EXPECT_FALSE(s.converged);
  EXPECT_TRUE(s.plan.allFinite());
}

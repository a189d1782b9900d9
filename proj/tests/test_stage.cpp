#include "errors.hpp"
#include "fixtures.hpp"
#include "qp.hpp"
#include "stage_sweep.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace resalloc;
using namespace resalloc::testing;

namespace {

// Best value of a 2-entity stage over a uniform grid of the box
// [c - r, c + r]^2 intersected with the stage constraints.
double grid_best(const StageProblem& sp, double x, const VectorXd& c, double r, int N) {
  double best = -INFINITY;
  VectorXd u(2);
  for (int i = 0; i < N; ++i) {
    u[0] = c[0] - r + 2.0 * r * i / (N - 1);
    for (int j = 0; j < N; ++j) {
      u[1] = c[1] - r + 2.0 * r * j / (N - 1);
      if (sp.budget && u.sum() > x) continue;
      if (sp.nonneg && (u.array() < 0.0).any()) continue;
      best = std::max(best, sp.objective(x, u));
    }
  }
  return best;
}

PiecewiseQuadratic kinked_continuation() {
  // concave, kinks at 4 and 9
  return PiecewiseQuadratic::make({4.0, 9.0}, {Quadratic{-0.01, 0.6, 0.0}, Quadratic{-0.01, 0.3, 1.2},
                                               Quadratic{-0.04, 0.84, -1.23}});
}

}  // namespace

TEST(Qp, BudgetBindsOnSymmetricProblem) {
  QpProblem qp;
  qp.H = -MatrixXd::Identity(2, 2);
  qp.g = VectorXd::Constant(2, 2.0);
  qp.A = MatrixXd::Ones(1, 2);
  qp.b = VectorXd::Constant(1, 1.0);
  const QpResult r = solve_qp(qp, VectorXd::Zero(2));
  EXPECT_NEAR(r.u[0], 0.5, 1e-12);
  EXPECT_NEAR(r.u[1], 0.5, 1e-12);
  ASSERT_EQ(r.active.size(), 1u);
  EXPECT_NEAR(r.multipliers[0], 1.5, 1e-12);
}

TEST(Qp, InactiveConstraintLeavesStationaryPoint) {
  QpProblem qp;
  qp.H = -MatrixXd::Identity(2, 2);
  qp.g = VectorXd::Constant(2, 0.25);
  qp.A = MatrixXd::Ones(1, 2);
  qp.b = VectorXd::Constant(1, 1.0);
  const QpResult r = solve_qp(qp, VectorXd::Zero(2));
  EXPECT_NEAR(r.u[0], 0.25, 1e-12);
  EXPECT_TRUE(r.active.empty());
}

TEST(Qp, RandomProblemsSatisfyKkt) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    MatrixXd L(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) L(i, j) = g(rng);
    QpProblem qp;
    qp.H = -(L * L.transpose() + 0.1 * MatrixXd::Identity(n, n));
    qp.g = VectorXd(n);
    for (int i = 0; i < n; ++i) qp.g[i] = 3.0 * g(rng);
    // budget plus nonnegativity
    qp.A = MatrixXd::Zero(n + 1, n);
    qp.A.row(0).setOnes();
    qp.A.bottomRows(n) = -MatrixXd::Identity(n, n);
    qp.b = VectorXd::Zero(n + 1);
    qp.b[0] = 1.0;
    const QpResult r = solve_qp(qp, VectorXd::Zero(n));
    const VectorXd slack = qp.b - qp.A * r.u;
    EXPECT_GE(slack.minCoeff(), -1e-10) << trial;
    // stationarity and dual feasibility
    VectorXd grad = qp.g + qp.H * r.u;
    for (size_t k = 0; k < r.active.size(); ++k) {
      EXPECT_GE(r.multipliers[static_cast<Eigen::Index>(k)], -1e-10) << trial;
      grad -= r.multipliers[static_cast<Eigen::Index>(k)] * qp.A.row(r.active[k]).transpose();
    }
    EXPECT_LT(grad.cwiseAbs().maxCoeff(), 1e-9) << trial;
  }
}

TEST(Qp, EqualityKktSingularThrows) {
  const MatrixXd H = MatrixXd::Zero(2, 2);
  const VectorXd g = VectorXd::Ones(2);
  const MatrixXd A = MatrixXd::Ones(1, 2);
  try {
    solve_equality_qp(H, g, A, VectorXd::Ones(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonpositiveCurvature);
  }
}

TEST(StageSweep, ScenarioStageObjectiveIsTheExpectation) {
  const auto atoms = six_atoms();
  const auto cont = kinked_continuation();
  const StageProblem sp = scenario_stage(atoms, 2, 1.0, 0.05, cont, false);
  VectorXd u(2);
  u << 1.3, -0.4;
  const double x = 6.0;
  double direct = 0.0;
  for (const auto& a : atoms) {
    const double xn = a.returns[0] * x + (a.returns.tail(2).array() - a.returns[0]).matrix().dot(u);
    direct += a.prob * (xn - 0.05 * xn * xn + cont(xn));
  }
  EXPECT_NEAR(sp.objective(x, u), direct, 1e-12);
}

TEST(StageSweep, SweepAgreesWithPointSolvesAndGrid) {
  const StageProblem sp = scenario_stage(six_atoms(), 2, 1.0, 0.05, kinked_continuation(), false);
  const StageSolution sol = sweep_stage(sp);
  EXPECT_TRUE(sol.value.is_concave(1e-9));
  for (double x : {-3.0, 0.5, 2.0, 4.5, 7.0, 12.0, 30.0}) {
    const StagePoint pt = solve_stage_at(sp, x);
    EXPECT_NEAR(sol.value(x), pt.value, 1e-9 * (1.0 + std::abs(pt.value))) << x;
    EXPECT_LT((sol.rule(x) - pt.u).cwiseAbs().maxCoeff(), 1e-7) << x;
    EXPECT_LE(pt.u.sum(), x + 1e-9);
    const double g = grid_best(sp, x, pt.u, 0.5, 401);
    EXPECT_GE(pt.value, g - 1e-12) << x;
    EXPECT_LE(pt.value - g, 1e-4) << x;
  }
}

TEST(StageSweep, NonnegStageStaysInOrthant) {
  const StageProblem sp = scenario_stage(six_atoms(), 2, 1.0, 0.05, PiecewiseQuadratic{}, true);
  const StageSolution sol = sweep_stage(sp);
  for (double x : {0.0, 0.7, 3.0, 10.0, 50.0}) {
    const VectorXd u = sol.rule(x);
    EXPECT_GE(u.minCoeff(), -1e-12) << x;
    EXPECT_LE(u.sum(), x + 1e-9) << x;
    const double g = grid_best(sp, x, u, 0.3, 301);
    EXPECT_GE(sol.value(x), g - 1e-12) << x;
  }
  EXPECT_THROW(solve_stage_at(sp, -1.0), Error);
}

TEST(StageSweep, OverdraftTermPricesExcess) {
  const PiecewiseTerm t = overdraft_term(2, 0.3);
  VectorXd u(2);
  u << 2.0, 1.5;
  EXPECT_NEAR(t.weight * t.f(t.arg(3.0, u)), -0.3 * 0.5, 1e-15);
  EXPECT_NEAR(t.weight * t.f(t.arg(4.0, u)), 0.0, 1e-15);
}

TEST(StageSweep, RandomScenarioStagesMatchPointSolves) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto atoms = random_atoms(rng, 2, 3);
    const StageProblem sp = scenario_stage(atoms, 2, 1.0, 0.03, kinked_continuation(), trial % 2 == 1);
    const StageSolution sol = sweep_stage(sp);
    EXPECT_TRUE(sol.value.is_concave(1e-8)) << trial;
    EXPECT_LT(sol.value.continuity_defect(), 1e-9) << trial;
    for (double x : {0.0, 1.0, 5.0, 15.0}) {
      const StagePoint pt = solve_stage_at(sp, x);
      EXPECT_NEAR(sol.value(x), pt.value, 1e-8 * (1.0 + std::abs(pt.value))) << trial << " " << x;
    }
  }
}

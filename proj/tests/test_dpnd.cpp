#include "dpnd.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace resalloc;
using namespace resalloc::testing;

namespace {

double stage_objective(const PeriodMoments& m, double a, double b, double x, const VectorXd& u) {
  return a * (m.mean_ref * x + m.mean_excess.dot(u)) -
         b * (m.second_ref * x * x + 2.0 * x * m.cross.dot(u) + u.dot(m.second_excess * u));
}

}  // namespace

// Reference values from tests/oracles/derive.py.

TEST(StageND, UnconstrainedAllocation) {
  const VectorXd u = unconstrained_stage_alloc(ref_moments(), 1.0, 0.05, 5.0);
  EXPECT_NEAR(u[0], 2.181208053691275, 1e-12);
  EXPECT_NEAR(u[1], 3.1879194630872485, 1e-12);
}

TEST(StageND, BindingAllocationAndMultiplier) {
  const auto r = constrained_stage_alloc(ref_moments(), 1.0, 0.05, 5.0);
  ASSERT_TRUE(r.binding);
  EXPECT_NEAR(r.u[0], 1.95652, 2e-5);
  EXPECT_NEAR(r.u[1], 3.04348, 2e-5);
  EXPECT_NEAR(r.u.sum(), 5.0, 1e-12);
  EXPECT_NEAR(r.multiplier, 0.04782608695652166, 1e-12);
}

TEST(StageND, SlackBudgetKeepsStationaryPoint) {
  const auto r = constrained_stage_alloc(ref_moments(), 1.0, 0.05, 20.0);
  EXPECT_FALSE(r.binding);
  EXPECT_LT((r.u - unconstrained_stage_alloc(ref_moments(), 1.0, 0.05, 20.0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StageND, LiteralVariantSpreadsExcessEvenly) {
  const VectorXd free = unconstrained_stage_alloc(ref_moments(), 1.0, 0.05, 5.0);
  const auto r = constrained_stage_alloc(ref_moments(), 1.0, 0.05, 5.0, true);
  const double nu = (free.sum() - 5.0) / 2.0;
  EXPECT_NEAR(r.multiplier, nu, 1e-14);
  EXPECT_NEAR(r.u[0], free[0] - nu, 1e-14);
  EXPECT_NEAR(r.u[1], free[1] - nu, 1e-14);
  // the exact projection does strictly better
  const auto exact = constrained_stage_alloc(ref_moments(), 1.0, 0.05, 5.0);
  EXPECT_GT(stage_objective(ref_moments(), 1.0, 0.05, 5.0, exact.u),
            stage_objective(ref_moments(), 1.0, 0.05, 5.0, r.u));
}

TEST(StageND, CostToGoMatchesStageObjective) {
  const PeriodMoments m = ref_moments();
  const auto J = cost_to_go_T(m, 1.0, 0.05);
  EXPECT_EQ(J.piece_count(), 2u);
  const double xb = regime_boundary_T(m, 1.0, 0.05);
  EXPECT_NEAR(unconstrained_stage_alloc(m, 1.0, 0.05, xb).sum(), xb, 1e-10);
  EXPECT_NEAR(J.breakpoints()[0], xb, 1e-12);
  for (double x : {-4.0, 1.0, 5.0, xb, 9.0, 40.0}) {
    const auto r = constrained_stage_alloc(m, 1.0, 0.05, x);
    EXPECT_NEAR(J(x), stage_objective(m, 1.0, 0.05, x, r.u), 1e-10) << x;
    EXPECT_LT((stage_rule_T(m, 1.0, 0.05)(x) - r.u).cwiseAbs().maxCoeff(), 1e-10) << x;
  }
  EXPECT_TRUE(J.is_concave());
  EXPECT_NEAR(J.left_derivative(xb), J.right_derivative(xb), 1e-10);
}

TEST(StageND, LiteralQuadraticDiffersOnlyInCurvature) {
  // the printed form doubles c'M^-1 c in the x^2 term; linear and constant
  // terms agree with the exact free regime
  const PeriodMoments m = ref_moments();
  const Quadratic q = cost_to_go_T_literal(m, 1.0, 0.05, 0);
  const Quadratic exact = cost_to_go_T(m, 1.0, 0.05).pieces().back();
  const MomentAlgebra al = moment_algebra(m);
  EXPECT_NEAR(q.q2 - exact.q2, 0.05 * al.c_c, 1e-14);
  EXPECT_NEAR(q.q1, exact.q1, 1e-14);
  EXPECT_NEAR(q.q0, exact.q0, 1e-14);
}

TEST(StageND, SingularMomentsRejected) {
  PeriodMoments m = ref_moments();
  m.second_excess << 0.2, 0.2, 0.2, 0.2;
  try {
    unconstrained_stage_alloc(m, 1.0, 0.05, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularMoments);
  }
}

TEST(HatRecursion, NonpositiveCurvatureRaised) {
  // a negative next-period curvature is rejected
  const StageCoefficients next = terminal_coefficients(1.0, 0.05);
  EXPECT_NO_THROW(hat_recursion(next, ref_moments(), 1.0, 0.05, 0));
  try {
    hat_recursion(terminal_coefficients(1.0, -0.05), ref_moments(), 1.0, 0.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonpositiveCurvature);
  }
}

TEST(HatRecursion, FreeRegimeMatchesTwoPeriodValue) {
  // with both budgets slack, the value entering period 1 is one quadratic
  const StageCoefficients c = hat_recursion(terminal_coefficients(1.0, 0.05), ref_moments(), 1.0, 0.05, 0);
  const auto J1 = cost_to_go_T(ref_moments(), c.a_hat, c.b_hat).plus(Quadratic{0, 0, c.gamma_hat});
  const std::vector<double> fit_x{60.0, 80.0, 100.0};
  const std::vector<double> fit_v{-184.2937034316759, -369.9324770905339, -617.2729940942577};
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(J1(fit_x[i]), fit_v[i], 1e-6 * std::abs(fit_v[i]));
}

TEST(BackwardND, BothModesMatchTreeSearchOnFreeRegime) {
  const std::vector<double> quad{-0.07712717918108233, 1.5158664024086301, 2.4121574757026645};
  for (auto mode : {DpMode::PaperRecursion, DpMode::ScenarioExact}) {
    const auto r = backward_induct_nd(six_atom_problem(2, 80.0), {mode, false, false});
    for (double x : {60.0, 80.0, 100.0}) {
      const double v = (quad[0] * x + quad[1]) * x + quad[2];
      EXPECT_NEAR(r.values[0](x), v, 1e-6 * std::abs(v)) << x;
    }
  }
}

TEST(BackwardND, ValueCountsAndConcavityOnRandomMoments) {
  std::mt19937_64 rng(21);
  int solved = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int T = 1 + trial % 5;
    const int n = 1 + trial % 3;
    ProblemSpec p;
    p.horizon = T;
    p.x0 = 10.0;
    p.model.n = n;
    for (int t = 0; t < T; ++t) {
      Period per;
      per.moments = random_moments(rng, n);
      p.model.periods.push_back(per);
      p.objective.a.push_back(1.0);
      p.objective.b.push_back(0.02);
    }
    DpndResult r;
    try {
      r = backward_induct_nd(p);
    } catch (const Error& e) {
      // very risky draws can lose curvature; that is reported, not hidden
      EXPECT_EQ(e.code(), ErrorCode::NonpositiveCurvature) << trial;
      continue;
    }
    for (int k = 0; k < T; ++k) {
      EXPECT_LE(r.values[static_cast<size_t>(k)].piece_count(), static_cast<size_t>(T - k + 1)) << trial;
      EXPECT_TRUE(r.values[static_cast<size_t>(k)].is_concave()) << trial;
    }
    ++solved;
  }
  EXPECT_GE(solved, 30);
}

TEST(BackwardND, ScenarioExactIsOptimalOnTree) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 2, 2, 3);
    const auto r = backward_induct_nd(p, {DpMode::ScenarioExact, false, false});
    const Evaluation ev = oracle_evaluate(p, policy_fn(r.policy));
    EXPECT_NEAR(ev.objective, r.values[0](p.x0), 1e-9 * (1.0 + std::abs(ev.objective))) << trial;
    for (const auto& v : r.values) EXPECT_TRUE(v.is_concave(1e-8)) << trial;
  }
}

TEST(BackwardND, LiteralModeProducesUncappedPolicyWithBorrowing) {
  auto p = six_atom_problem(2, 5.0);
  p.borrow_cost = std::vector<double>{0.0, 0.0};
  const auto r = backward_induct_nd(p, {DpMode::PaperRecursion, true, false});
  EXPECT_EQ(r.values[0].piece_count(), 1u);
  const VectorXd u = r.policy[1](5.0);
  EXPECT_NEAR(u[0], 2.181208053691275, 1e-9);
  EXPECT_NEAR(u[1], 3.1879194630872485, 1e-9);
}

TEST(BackwardND, Errors) {
  auto p = six_atom_problem(1, 5.0);
  p.objective.b = {0.0};
  try {
    backward_induct_nd(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LinearStage);
  }
  p = six_atom_problem(1, 5.0);
  p.model.periods[0].atoms.clear();
  try {
    backward_induct_nd(p, {DpMode::ScenarioExact, false, false});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAtoms);
  }
  p = six_atom_problem(1, 5.0);
  EXPECT_THROW(backward_induct_nd(p, {DpMode::ScenarioExact, true, false}), Error);
}

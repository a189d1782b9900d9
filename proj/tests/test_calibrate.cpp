#include "calibrate.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "solve.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace resalloc;
using namespace resalloc::testing;

namespace {

ProblemSpec lagrangian(double x0, std::vector<double> w, std::vector<double> y) {
  ProblemSpec p = ref1d(x0, static_cast<int>(w.size()));
  p.objective = {};
  p.objective.form = ObjectiveForm::Lagrangian;
  p.objective.w = std::move(w);
  p.objective.y = std::move(y);
  return p;
}

ProblemSpec variance_capped(double x0, double alpha) {
  ProblemSpec p = ref1d(x0);
  p.objective = {};
  p.objective.form = ObjectiveForm::VarianceConstrained;
  p.objective.w = {1.0};
  p.objective.alpha = {alpha};
  return p;
}

SeparableSolver exact_solver() {
  SolveOptions o;
  o.scenario_exact = true;
  return make_solver(o);
}

}  // namespace

TEST(Pi2ToPi3, ReferenceInstanceReachesGridOptimum) {
  // derive.py: grid search of w E[x] - y Var[x] over u in [-30, 30], step 6e-4
  const Pi3Result r = pi2_to_pi3(lagrangian(30.0, {1.0}, {0.01}), exact_solver());
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_NEAR(r.objective, 34.56, 1e-9);
  EXPECT_NEAR(r.solution.policy[0](30.0)[0], 30.0, 1e-9);
  EXPECT_NEAR(r.a[0], 1.0 + 2.0 * 0.01 * r.solution.means[0], 1e-8 * (1.0 + r.a[0]));
  EXPECT_DOUBLE_EQ(r.b[0], 0.01);
}

TEST(Pi2ToPi3, ZeroMultiplierIsImmediate) {
  const Pi3Result r = pi2_to_pi3(lagrangian(30.0, {1.0}, {0.0}), exact_solver());
  EXPECT_EQ(r.iterations, 1);
  EXPECT_DOUBLE_EQ(r.a[0], 1.0);
  EXPECT_NEAR(r.solution.means[0], 36.0, 1e-12);
}

TEST(Pi2ToPi3, TwoPeriodFixedPointHolds) {
  const Pi3Result r = pi2_to_pi3(lagrangian(30.0, {0.5, 1.0}, {0.02, 0.01}), exact_solver());
  EXPECT_LE(r.residual, 1e-8);
  const std::vector<double> w{0.5, 1.0}, y{0.02, 0.01};
  for (size_t t = 0; t < 2; ++t) {
    EXPECT_NEAR(r.a[t], w[t] + 2.0 * y[t] * r.solution.means[t], 1e-7 * (1.0 + r.a[t])) << t;
  }
  ASSERT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace.back().iteration, r.iterations);
}

TEST(Pi2ToPi3, DampingStillConverges) {
  Pi3Options o;
  o.damping = 0.5;
  const Pi3Result r = pi2_to_pi3(lagrangian(30.0, {0.5, 1.0}, {0.02, 0.01}), exact_solver(), o);
  EXPECT_LE(r.residual, 1e-8);
}

TEST(Pi2ToPi3, IterationCapRaisesNoConvergence) {
  Pi3Options o;
  o.max_iter = 1;
  try {
    pi2_to_pi3(lagrangian(30.0, {0.5, 1.0}, {0.02, 0.01}), exact_solver(), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
  }
}

TEST(Pi1ToPi2, VarianceCapMet) {
  // derive.py: Var = 0.16 u^2 with u = 0.15 / (0.32 y) gives y = 0.041926... at alpha = 20
  const Pi1Result r = pi1_to_pi2(variance_capped(30.0, 20.0), exact_solver());
  const double var = r.pi2.solution.variances[0];
  EXPECT_LE(var, 1.01 * 20.0);
  EXPECT_GE(var, 0.99 * 20.0);
  EXPECT_NEAR(r.y[0], 0.04192627457812106, 0.01 * 0.04192627457812106);
  EXPECT_NEAR(r.gap, r.dual - r.primal, 1e-12);
  EXPECT_NEAR(r.violation[0], var - 20.0, 1e-12);
}

TEST(Pi1ToPi2, SlackCapGivesZeroMultiplier) {
  const Pi1Result r = pi1_to_pi2(variance_capped(30.0, 1e9), exact_solver());
  EXPECT_EQ(r.y[0], 0.0);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_NEAR(r.pi2.solution.means[0], 36.0, 1e-12);  // everything in the risky entity
}

TEST(Pi1ToPi2, WrongFormRejected) {
  EXPECT_THROW(pi1_to_pi2(lagrangian(30.0, {1.0}, {0.01}), exact_solver()), Error);
  EXPECT_THROW(pi2_to_pi3(variance_capped(30.0, 20.0), exact_solver()), Error);
}

TEST(Chance, PureMeanStartAndBound) {
  const ProblemSpec p = lagrangian(30.0, {1.0}, {0.01});
  const SeparableSolution pure = exact_solver()(with_separable(p, {1.0}, {0.0}));
  EXPECT_NEAR(pure.means[0], 36.0, 1e-12);
  EXPECT_NEAR(pure.variances[0], 144.0, 1e-9);
  const double d = 35.5;
  EXPECT_NEAR(pure.variances[0] / ((d - pure.means[0]) * (d - pure.means[0])), 576.0, 1e-6);

  const ChanceResult r = chance_to_meanvar(p, {{1.0}, {d}}, exact_solver());
  EXPECT_NEAR(r.means_initial[0], 36.0, 1e-12);
  ASSERT_EQ(r.bound.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.bound[0]));
  EXPECT_GT(r.y[0], 0.0);
  EXPECT_FALSE(r.trace.empty());
}

TEST(Chance, FarTargetsLeaveMeanMaximizer) {
  const ProblemSpec p = lagrangian(30.0, {1.0}, {0.01});
  const ChanceResult r = chance_to_meanvar(p, {{1.0}, {-1e9}}, exact_solver());
  EXPECT_LT(r.y[0], 1e-17);
  EXPECT_NEAR(r.pi2.solution.means[0], 36.0, 1e-6);
}

TEST(Chance, TargetAtMeanRaised) {
  // zero weight: the solution keeps everything riskless, E[x_1] = 31.5
  const ProblemSpec p = lagrangian(30.0, {0.0}, {0.01});
  try {
    chance_to_meanvar(p, {{0.0}, {31.5}}, exact_solver());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TargetAtMean);
  }
}

TEST(Trace, CsvHeader) {
  const std::vector<TraceRow> rows{{1, {0.1, 0.2}, {3.0, 4.0}, {0.5, -0.5}}};
  const std::string csv = trace_to_csv(rows, "y");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,y_1,y_2,var_1,var_2,res_1,res_2");
}

TEST(Linear, UnboundedPureMeanReported) {
  // two entities with different mean excess returns and no sign restriction
  const ProblemSpec p = with_separable(six_atom_problem(1, 5.0), {1.0}, {0.0});
  try {
    solve_separable(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundedAbove);
  }
  SolveOptions o;
  o.nonneg = true;
  const SolveReport r = solve_separable(p, o);
  EXPECT_EQ(r.method, "linear");
  EXPECT_NEAR(r.policy[0](5.0)[1], 5.0, 1e-15);  // the entity with the larger mean excess
}

TEST(Pi1ToPi2, TwoPeriodCapsMetWithSlackness) {
  ProblemSpec p = ref1d(30.0, 2);
  p.objective = {};
  p.objective.form = ObjectiveForm::VarianceConstrained;
  p.objective.w = {0.5, 1.0};
  p.objective.alpha = {20.0, 60.0};
  const Pi1Result r = pi1_to_pi2(p, exact_solver());
  const double ymax = std::max(r.y[0], r.y[1]);
  for (size_t t = 0; t < 2; ++t) {
    const double var = r.pi2.solution.variances[t];
    EXPECT_LE(var, 1.01 * p.objective.alpha[t]) << t;
    EXPECT_LE(r.y[t] * (p.objective.alpha[t] - var), 1e-2 * p.objective.alpha[t] * ymax) << t;
  }
  EXPECT_EQ(static_cast<int>(r.trace.size()), r.iterations);
  EXPECT_LE(r.iterations, 500);
}

TEST(Pi2ToPi3, NewtonStepFinishesQuickly) {
  // the map is affine near the fixed point, so Newton lands on it
  const Pi3Result r = pi2_to_pi3(lagrangian(30.0, {0.5, 1.0}, {0.02, 0.01}), exact_solver());
  EXPECT_LE(r.iterations, 6);
}

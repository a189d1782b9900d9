#include "errors.hpp"
#include "fixtures.hpp"
#include "model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace resalloc;
using namespace resalloc::testing;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::SolverFailure;
}

}  // namespace

TEST(Moments, SixAtomsReproduceReferenceMoments) {
  const PeriodMoments m = moments_from_scenarios(six_atoms(), 2);
  const PeriodMoments r = ref_moments();
  EXPECT_NEAR(m.mean_ref, r.mean_ref, 1e-14);
  EXPECT_NEAR(m.second_ref, r.second_ref, 1e-14);
  EXPECT_LT((m.mean_excess - r.mean_excess).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((m.cross - r.cross).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((m.second_excess - r.second_excess).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Moments, ReferenceOneDimensional) {
  const PeriodMoments m = moments_from_scenarios(ref1d_atoms(), 1);
  EXPECT_DOUBLE_EQ(m.mean_ref, 1.05);
  EXPECT_NEAR(m.mean_excess[0], 0.15, 1e-15);
  // E[P^2] = (0.55^2 + 0.25^2) / 2
  EXPECT_NEAR(m.second_excess(0, 0), 0.18250, 1e-15);
  EXPECT_NEAR(m.cross[0], 1.05 * 0.15, 1e-15);
}

TEST(Moments, AtomOrderDoesNotMatter) {
  auto atoms = six_atoms();
  const PeriodMoments a = moments_from_scenarios(atoms, 2);
  std::reverse(atoms.begin(), atoms.end());
  const PeriodMoments b = moments_from_scenarios(atoms, 2);
  EXPECT_LT((a.second_excess - b.second_excess).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(a.second_ref, b.second_ref, 1e-15);
}

TEST(Moments, RejectsMalformedAtoms) {
  EXPECT_EQ(code_of([] { moments_from_scenarios({}, 1); }), ErrorCode::EmptyAtomList);
  EXPECT_EQ(code_of([] { moments_from_scenarios(std::vector{atom(0.5, {1.0, 1.2}), atom(0.4, {1.0, 0.9})}, 1); }),
            ErrorCode::ProbabilityNotNormalized);
  EXPECT_EQ(code_of([] { moments_from_scenarios(std::vector{atom(1.0, {1.0, 1.2, 1.1})}, 1); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { moments_from_scenarios(std::vector{atom(-0.5, {1.0, 1.2}), atom(1.5, {1.0, 0.9})}, 1); }),
            ErrorCode::ProbabilityNotNormalized);
}

TEST(Validation, ReferenceInstancesPass) {
  EXPECT_TRUE(validate_assumption1(ref_moments()).pass());
  EXPECT_TRUE(validate_assumption1(moments_from_scenarios(ref1d_atoms(), 1)).pass());
}

TEST(Validation, DuplicateEntityFailsFirstCondition) {
  const auto m = moments_from_scenarios(std::vector{atom(0.5, {1.0, 1.1, 1.1}), atom(0.5, {1.0, 0.9, 0.9})}, 2);
  const ValidationReport r = validate_assumption1(m);
  ASSERT_FALSE(r.pass());
  ASSERT_NE(r.failed(), nullptr);
  EXPECT_EQ(r.failed()->name, "eqn:condition1");
}

TEST(Validation, EntityEqualToReferenceFails) {
  const auto m = moments_from_scenarios(std::vector{atom(0.5, {1.1, 1.1}), atom(0.5, {0.9, 0.9})}, 1);
  const ValidationReport r = validate_assumption1(m);
  ASSERT_FALSE(r.pass());
  EXPECT_EQ(r.failed()->name, "eqn:condition1");
}

TEST(Validation, DeterministicExcessWithRisklessReferenceFailsSecondCondition) {
  // P constant and e riskless: E[e^2] - E[eP]^2 / E[P^2] = Var(e) = 0
  const auto m = moments_from_scenarios(std::vector{atom(0.5, {1.05, 1.15}), atom(0.5, {1.05, 1.15})}, 1);
  const ValidationReport r = validate_assumption1(m);
  ASSERT_FALSE(r.pass());
  EXPECT_EQ(r.failed()->name, "eqn:condition2");
}

TEST(Validation, AsymmetricMomentsFlagged) {
  PeriodMoments m = ref_moments();
  m.second_excess(0, 1) = 0.03;
  const ValidationReport r = validate_assumption1(m);
  EXPECT_FALSE(r.pass());
  EXPECT_EQ(r.failed()->name, "symmetry");
}

TEST(Validation, RandomInstancesPass) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const int n = 1 + i % 4;
    EXPECT_TRUE(validate_assumption1(random_moments(rng, n)).pass()) << i;
    const auto atoms = random_atoms(rng, n, n + 2);
    EXPECT_TRUE(validate_assumption1(moments_from_scenarios(atoms, n)).pass()) << i;
  }
}

TEST(CheckProblem, CatchesStructuralErrors) {
  EXPECT_NO_THROW(check_problem(ref1d(10.0, 2)));
  auto p = ref1d(10.0, 2);
  p.objective.a.pop_back();
  EXPECT_EQ(code_of([&] { check_problem(p); }), ErrorCode::SchemaError);
  p = ref1d(10.0);
  p.objective.b[0] = -1.0;
  EXPECT_EQ(code_of([&] { check_problem(p); }), ErrorCode::SchemaError);
  p = ref1d(10.0);
  p.borrow_cost = std::vector<double>{-0.1};
  EXPECT_EQ(code_of([&] { check_problem(p); }), ErrorCode::SchemaError);
  p = ref1d(10.0);
  p.model.periods[0].moments.mean_ref = 1.2;
  EXPECT_EQ(code_of([&] { check_problem(p); }), ErrorCode::SchemaError);
}

TEST(Objective, EachFormFromMoments) {
  auto p = ref1d(30.0, 2);
  const std::vector<double> means{33.0, 36.0}, seconds{1100.0, 1400.0}, od{0.0, 0.0};
  EXPECT_NEAR(objective_value(p, means, seconds, od), 33.0 - 11.0 + 36.0 - 14.0, 1e-12);

  p.objective.form = ObjectiveForm::Lagrangian;
  p.objective.w = {1.0, 2.0};
  p.objective.y = {0.1, 0.01};
  const double v = 33.0 - 0.1 * (1100.0 - 33.0 * 33.0) + 72.0 - 0.01 * (1400.0 - 36.0 * 36.0);
  EXPECT_NEAR(objective_value(p, means, seconds, od), v, 1e-12);

  p.objective.form = ObjectiveForm::VarianceConstrained;
  p.objective.alpha = {10.0, 10.0};
  EXPECT_NEAR(objective_value(p, means, seconds, od), 105.0, 1e-12);

  p.borrow_cost = std::vector<double>{0.5, 0.25};
  EXPECT_NEAR(objective_value(p, means, seconds, std::vector<double>{2.0, 4.0}), 105.0 - 2.0, 1e-12);
}

TEST(MergeAtoms, CombinesIdenticalReturns) {
  const auto merged =
      merge_atoms(std::vector{atom(0.25, {1.0, 1.2}), atom(0.5, {1.0, 0.9}), atom(0.25, {1.0, 1.2})});
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_DOUBLE_EQ(merged[0].prob, 0.5);
  EXPECT_DOUBLE_EQ(merged[0].returns[1], 1.2);
  EXPECT_DOUBLE_EQ(merged[1].prob, 0.5);
}

#pragma once

#include "model.hpp"
#include "policy.hpp"
#include "pwq.hpp"

#include <vector>

namespace resalloc {

// One period with a riskless reference return r0 and one risky entity.
struct Stage1DParams {
  double a = 0.0;
  double b = 0.0;
  double r0 = 1.0;
  double p1 = 0.0;  // E[e_1]
  double p2 = 0.0;  // E[e_1^2]
  std::vector<ScalarAtom> atoms;  // risky return atoms
};

// Period t of an n = 1 Separable problem. Throws InvalidArgument when the
// reference return is not riskless, MissingAtoms without atoms.
Stage1DParams stage_params_1d(const ProblemSpec& problem, int t);

struct Stage1DResult {
  double y = 0.0;      // risky allocation
  double value = 0.0;  // E[a x_T - b x_T^2]
  double y_star = 0.0; // uncapped stationary point
};

// Last-period allocation min(y*, x) and its value. With nonneg the
// allocation is also floored at 0.
Stage1DResult stage_T_allocation_1d(const Stage1DParams& p, double x, bool nonneg = false);

// Closed-form last-period value as a function of x (two pieces).
PiecewiseQuadratic stage_T_value_1d(const Stage1DParams& p);

// Resource level where y*(x) = x.
double threshold_1d(const Stage1DParams& p);

struct Threshold1D {
  double x_star = 0.0;  // all-in below this level; NaN if the rule never goes all-in
  StageRule rule;

  double operator()(double x) const { return rule(x)[0]; }
};

struct Dp1dResult {
  std::vector<Threshold1D> policy;          // period order
  std::vector<PiecewiseQuadratic> values;   // values[k]: value entering period k+1
};

Dp1dResult backward_induct_1d(const ProblemSpec& problem, bool nonneg = false);

}  // namespace resalloc

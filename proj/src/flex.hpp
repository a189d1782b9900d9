#pragma once

#include "model.hpp"
#include "pwq.hpp"

#include <Eigen/Dense>

namespace resalloc {

// Stage objective a x_t - b x_t^2 - c [1'u - x]^+ plus constant gamma.
struct FlexCoefficients {
  double a_tilde = 0.0;
  double b_tilde = 0.0;
  double gamma_tilde = 0.0;
  double c_tilde = 0.0;  // per-unit overdraft cost
  int regime = 0;        // 0 free, 1 at the budget, 2 overdrawn
  double a = 0.0;
  double b = 0.0;
};

// Maximizer of E[a x_t - b x_t^2] - c [1'u - x]^+.
VectorXd flex_stage_alloc(const PeriodMoments& m, const FlexCoefficients& fc, double x);

// Smallest overdraft cost at which the hard-budget allocation is optimal.
double flex_hard_limit_cost(const PeriodMoments& m, const FlexCoefficients& fc, double x);

// Stage value in x (up to three pieces).
PiecewiseQuadratic flex_cost_to_go(const PeriodMoments& m, double a, double b, double c);

// Coefficients of period t from period t+1. The literal variant uses the
// (1 - c_t A) factor with raw next-period weights.
FlexCoefficients flex_recursion(const FlexCoefficients& next, const PeriodMoments& m_next, double a_t, double b_t,
                                double c_t, int regime, bool paper_literal = false);

}  // namespace resalloc

#pragma once

#include "model.hpp"
#include "policy.hpp"
#include "pwq.hpp"

#include <Eigen/Dense>

#include <vector>

namespace resalloc {

// Quantities of one period built from M = E[PP'], c = E[eP], mu = E[P].
struct MomentAlgebra {
  int n = 0;
  double mean_ref = 0.0;
  double second_ref = 0.0;
  VectorXd Minv_mu;
  VectorXd Minv_c;
  VectorXd Minv_1;
  double mu_mu = 0.0;  // mu'M^-1 mu
  double c_c = 0.0;    // c'M^-1 c
  double mu_c = 0.0;   // mu'M^-1 c
  double sigma1 = 0.0; // 1'M^-1 mu
  double sigma2 = 0.0; // 1'M^-1 c
  double S = 0.0;      // 1'M^-1 1
};

// Throws SingularMoments when E[PP'] fails the positive-definiteness check.
MomentAlgebra moment_algebra(const PeriodMoments& m);

// Stationary point of E[a x_t - b x_t^2] over u.
VectorXd unconstrained_stage_alloc(const PeriodMoments& m, double a, double b, double x);

struct ConstrainedAllocation {
  VectorXd u;
  bool binding = false;
  double multiplier = 0.0;  // nu
};

// Maximizer over 1'u <= x. The literal variant spreads the excess evenly,
// nu = (1'u* - x) / n and u = u* - nu 1.
ConstrainedAllocation constrained_stage_alloc(const PeriodMoments& m, double a, double b, double x,
                                              bool paper_literal = false);

// Last-period value in x with its two budget regimes.
PiecewiseQuadratic cost_to_go_T(const PeriodMoments& m, double a, double b);

// The printed last-period quadratic for regime A in {0, 1}.
Quadratic cost_to_go_T_literal(const PeriodMoments& m, double a, double b, int regime);

// Resource level where 1'u*(x) = x; NaN when the budget slack does not
// depend on x.
double regime_boundary_T(const PeriodMoments& m, double a, double b);

// Last-period allocation as a function of x.
StageRule stage_rule_T(const PeriodMoments& m, double a, double b, bool paper_literal = false);

struct StageCoefficients {
  double a_hat = 0.0;
  double b_hat = 0.0;
  double gamma_hat = 0.0;
  int regime = 0;  // budget regime of the following period this set was built on
  double a = 0.0;  // raw stage weights
  double b = 0.0;
};

StageCoefficients terminal_coefficients(double a, double b);

// Coefficients of period t from those of period t+1 (with that period's
// moments) under regime A_{t+1}. Throws NonpositiveCurvature if b_hat <= 0.
StageCoefficients hat_recursion(const StageCoefficients& next, const PeriodMoments& m_next, double a_t, double b_t,
                                int regime, bool paper_literal = false);

enum class DpMode { PaperRecursion, ScenarioExact };

struct DpndOptions {
  DpMode mode = DpMode::PaperRecursion;
  bool paper_literal = false;
  bool nonneg = false;
};

struct DpndResult {
  Policy policy;                                        // period order
  std::vector<PiecewiseQuadratic> values;               // values[k]: value entering period k+1
  std::vector<std::vector<StageCoefficients>> coefficients;  // per period, one set per region
};

DpndResult backward_induct_nd(const ProblemSpec& problem, const DpndOptions& options = {});

}  // namespace resalloc

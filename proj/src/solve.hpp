#pragma once

#include "calibrate.hpp"
#include "dpnd.hpp"
#include "model.hpp"
#include "policy.hpp"
#include "pwq.hpp"

#include <optional>
#include <string>
#include <vector>

namespace resalloc {

struct SolveOptions {
  bool paper_literal = false;
  bool scenario_exact = false;
  bool nonneg = false;
  Pi3Options pi3;
  Pi1Options pi1;
};

struct SolveReport {
  std::string method;  // dp1d, dpnd-recursion, dpnd-scenario, dpnd-literal, linear (all b = 0)
  Policy policy;
  std::vector<PiecewiseQuadratic> values;
  std::vector<std::vector<StageCoefficients>> coefficients;  // dpnd only
  std::vector<double> thresholds;                            // dp1d only: x* per period

  std::vector<double> a;  // separable weights actually solved
  std::vector<double> b;
  std::vector<double> y;  // multipliers (Lagrangian and VarianceConstrained)

  double separable_value = 0.0;  // values[0](x0)
  std::string moments_method;    // tree, affine or none
  std::vector<double> means;
  std::vector<double> seconds;
  std::vector<double> variances;
  std::vector<double> overdraft;
  double objective = 0.0;  // declared form, from the exact moments

  std::optional<Pi3Result> pi3;
  std::optional<Pi1Result> pi1;
};

// Backward induction on a Separable problem. With b = 0 in every period the
// stages are linear and solved in closed form (UnboundedAbove when a stage
// has no maximizer).
SolveReport solve_separable(const ProblemSpec& problem, const SolveOptions& options = {});

// Dispatches on the objective form: Separable directly, Lagrangian through
// pi2_to_pi3, VarianceConstrained through pi1_to_pi2.
SolveReport solve(const ProblemSpec& problem, const SolveOptions& options = {});

// Solver handle for the calibration loops. Throws if exact moments are not
// available for the solved policy.
SeparableSolver make_solver(const SolveOptions& options);

struct CompareRow {
  int period = 0;
  double x = 0.0;               // E[x_{t-1}] under the budget-enforced policy
  double constrained_sum = 0.0; // 1'u
  double free_sum = 0.0;        // 1'u of the uncapped closed form
  VectorXd constrained;
  VectorXd free;
  bool free_infeasible = false;
};

// Budget-enforced solution against the uncapped paper-literal allocation,
// both evaluated along the budget-enforced mean trajectory.
std::vector<CompareRow> compare_budget(const ProblemSpec& problem, const SolveOptions& options = {});

}  // namespace resalloc

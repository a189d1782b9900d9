#pragma once

#include "model.hpp"
#include "policy.hpp"

#include <functional>
#include <string>
#include <vector>

namespace resalloc {

// What a calibration loop needs back from one separable solve.
struct SeparableSolution {
  Policy policy;
  double value = 0.0;  // sum_t E[a_t x_t - b_t x_t^2], as claimed by the solver
  std::vector<double> means;
  std::vector<double> variances;
};

// Solves the given problem, whose objective is Separable.
using SeparableSolver = std::function<SeparableSolution(const ProblemSpec&)>;

struct TraceRow {
  int iteration = 0;
  std::vector<double> params;  // y for pi1, a for pi2, y' for chance
  std::vector<double> variances;
  std::vector<double> residuals;
};

// iteration,p_1..p_T,var_1..var_T,res_1..res_T
std::string trace_to_csv(const std::vector<TraceRow>& trace, const std::string& param_name);

// Copy of `problem` with a Separable (a, b) objective.
ProblemSpec with_separable(const ProblemSpec& problem, std::vector<double> a, std::vector<double> b);

struct Pi3Options {
  double damping = 1.0;  // fallback step a <- a + damping (a_new - a)
  int max_iter = 200;
  double tol = 1e-8;
};

struct Pi3Result {
  std::vector<double> a;
  std::vector<double> b;
  SeparableSolution solution;  // for the returned (a, b)
  double objective = 0.0;      // sum_t w_t E[x_t] - y_t Var[x_t]
  double residual = 0.0;       // max_t |w_t + 2 y_t E[x_t] - a_t| / (1 + |a_t|)
  int iterations = 0;
  std::vector<TraceRow> trace;
};

// Fixed point a_t = w_t + 2 y_t E[x_t], b_t = y_t. `problem` must carry a
// Lagrangian objective. Each iteration tries a finite-difference Newton step
// and falls back to the damped substitution step when that does not lower
// the residual. Throws NoConvergence with the last residual.
Pi3Result pi2_to_pi3(const ProblemSpec& problem, const SeparableSolver& solver, const Pi3Options& options = {});

struct Pi1Options {
  int max_iter = 500;  // Lagrangian solves
  double feas_tol = 1e-2;  // Var_t <= (1 + feas_tol) alpha_t
  double slack_tol = 1e-2; // y_t (alpha_t - Var_t) <= slack_tol alpha_t max(y)
  Pi3Options inner;
};

struct Pi1Result {
  std::vector<double> y;
  Pi3Result pi2;                 // Lagrangian solution at y
  std::vector<double> violation; // Var_t - alpha_t
  double primal = 0.0;           // sum_t w_t E[x_t]
  double dual = 0.0;             // Lagrangian value + sum_t y_t alpha_t
  double gap = 0.0;              // dual - primal
  int iterations = 0;            // Lagrangian solves used
  std::vector<TraceRow> trace;   // one row per solve
};

// Cyclic search over y starting from 0, last period first. Var_t does not increase with y_t, so
// each period's multiplier is bracketed and bisected (geometrically) until
// Var_t sits in [(1 - slack_tol/2) alpha_t, (1 + feas_tol/2) alpha_t], or y_t
// drops to 0 with Var_t <= alpha_t. Sweeps repeat until both tolerances hold
// for every period at once. A solve that fails counts as infinitely risky.
Pi1Result pi1_to_pi2(const ProblemSpec& problem, const SeparableSolver& solver, const Pi1Options& options = {});

struct ChanceSpec {
  std::vector<double> w;
  std::vector<double> d;
};

struct ChanceOptions {
  int max_rounds = 50;
  double tol = 1e-6;        // max_t |change in E[x_t]|
  double min_distance = 1e-6;
  Pi3Options inner;
};

struct ChanceResult {
  std::vector<double> w;
  std::vector<double> y;
  std::vector<int> skipped;  // periods (1-based) with |d_t - m_t| below min_distance
  Pi3Result pi2;
  std::vector<double> means_initial;  // pure-mean trajectory
  std::vector<double> bound;          // Var_t / (d_t - E[x_t])^2 of the final solution
  int rounds = 0;
  std::vector<TraceRow> trace;
};

// Reweighting surrogate: y'_t = w_t / (d_t - m_t)^2 from the current mean
// trajectory, starting at the pure-mean solution. Throws TargetAtMean when a
// period is still skipped after the last round.
ChanceResult chance_to_meanvar(const ProblemSpec& problem, const ChanceSpec& spec, const SeparableSolver& solver,
                               const ChanceOptions& options = {});

}  // namespace resalloc

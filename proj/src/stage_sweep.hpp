#pragma once

#include "model.hpp"
#include "policy.hpp"
#include "pwq.hpp"

#include <Eigen/Dense>

#include <vector>

namespace resalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// 0.5 u'Quu u + x qux'u + qu'u + qxx x^2 + qx x + q0
struct StageQuadratic {
  MatrixXd Quu;
  VectorXd qux;
  VectorXd qu;
  double qxx = 0.0;
  double qx = 0.0;
  double q0 = 0.0;

  static StageQuadratic zero(int n);
  double operator()(double x, const VectorXd& u) const;
};

// l(x, u) = x_coef * x + w'u
struct LinearFunctional {
  double x_coef = 0.0;
  VectorXd w;

  double operator()(double x, const VectorXd& u) const { return x_coef * x + w.dot(u); }
};

// weight * f(l(x, u)) with f concave piecewise quadratic.
struct PiecewiseTerm {
  double weight = 1.0;
  LinearFunctional arg;
  PiecewiseQuadratic f;
};

// One stage problem in resource x:
//   maximize base(x, u) + sum_j terms_j(x, u)
//   subject to 1'u <= x (if budget) and u >= 0 (if nonneg).
struct StageProblem {
  int n = 0;
  StageQuadratic base;
  std::vector<PiecewiseTerm> terms;
  bool budget = true;
  bool nonneg = false;

  double objective(double x, const VectorXd& u) const;
};

struct StagePoint {
  VectorXd u;
  double value = 0.0;
};

// Exact maximizer at a fixed x. Throws InvalidArgument when x is infeasible
// (x < 0 with budget and nonneg), NonpositiveCurvature when unbounded.
StagePoint solve_stage_at(const StageProblem& problem, double x);

struct StageSolution {
  PiecewiseQuadratic value;  // x -> optimal stage objective
  StageRule rule;            // x -> maximizer
};

// Exact parametric solution over all x (x >= 0 when budget and nonneg are
// both set; the first piece is then extended to the left).
StageSolution sweep_stage(const StageProblem& problem);

// Scenario stage of the separable objective: E[a x_t - b x_t^2 + next(x_t)]
// with x_t = e x + P'u over the (merged) atoms.
StageProblem scenario_stage(std::span<const ScenarioAtom> atoms, int n, double a, double b,
                            const PiecewiseQuadratic& next, bool nonneg);

// -cost * [1'u - x]^+
PiecewiseTerm overdraft_term(int n, double cost);

}  // namespace resalloc

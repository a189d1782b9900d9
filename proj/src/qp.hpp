#pragma once

#include <Eigen/Dense>

#include <vector>

namespace resalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// maximize 0.5 u'Hu + g'u  subject to  A u <= b, with H negative definite on
// every face the iteration visits.
struct QpProblem {
  MatrixXd H;
  VectorXd g;
  MatrixXd A;  // rows are constraints; may have zero rows
  VectorXd b;
};

struct QpResult {
  VectorXd u;
  std::vector<int> active;  // working-set rows at the optimum
  VectorXd multipliers;     // one per active row; g + Hu = A_active' * multipliers
  double value = 0.0;
  int iterations = 0;
};

// Primal active-set method started from a feasible point.
QpResult solve_qp(const QpProblem& qp, const VectorXd& feasible_start);

struct EqualityQpResult {
  VectorXd u;
  VectorXd multipliers;
};

// Stationary point of 0.5 u'Hu + g'u on {Aeq u = beq}. Throws
// NonpositiveCurvature when the KKT matrix is singular.
EqualityQpResult solve_equality_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& Aeq, const VectorXd& beq);

}  // namespace resalloc

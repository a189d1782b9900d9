#include "qp.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace resalloc {
namespace {

MatrixXd rows_of(const MatrixXd& A, const std::vector<int>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), A.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(idx[i]);
  return out;
}

bool independent_of(const MatrixXd& W, const VectorXd& row) {
  if (W.rows() == 0) return row.norm() > 0.0;
  if (W.rows() >= W.cols()) return false;
  MatrixXd stacked(W.rows() + 1, W.cols());
  stacked << W, row.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked.transpose());
  qr.setThreshold(1e-10);
  return qr.rank() == stacked.rows();
}

struct KktSolve {
  VectorXd x;
  VectorXd lambda;
};

// [-H A'; A 0] [x; lambda] = [rhs_top; rhs_bottom]
KktSolve solve_kkt(const MatrixXd& H, const MatrixXd& Aw, const VectorXd& rhs_top, const VectorXd& rhs_bottom) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = Aw.rows();
  MatrixXd K = MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = -H;
  if (m > 0) {
    K.topRightCorner(n, m) = Aw.transpose();
    K.bottomLeftCorner(m, n) = Aw;
  }
  VectorXd rhs(n + m);
  rhs << rhs_top, rhs_bottom;
  Eigen::FullPivLU<MatrixXd> lu(K);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    fail(ErrorCode::NonpositiveCurvature, "objective is not strictly concave on the active face");
  }
  const VectorXd sol = lu.solve(rhs);
  return {sol.head(n), sol.tail(m)};
}

}  // namespace

EqualityQpResult solve_equality_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& Aeq, const VectorXd& beq) {
  // -H u + Aeq' lambda = g,  Aeq u = beq  <=>  g + H u = Aeq' lambda
  KktSolve s = solve_kkt(H, Aeq, g, beq);
  return {std::move(s.x), std::move(s.lambda)};
}

QpResult solve_qp(const QpProblem& qp, const VectorXd& feasible_start) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  VectorXd u = feasible_start;
  const double scale = 1.0 + (m > 0 ? qp.b.cwiseAbs().maxCoeff() : 0.0) + u.cwiseAbs().maxCoeff();
  const double feas_tol = 1e-10 * scale;

  std::vector<int> working;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double slack = qp.b[i] - qp.A.row(i).dot(u);
    if (slack < -1e-7 * scale) fail(ErrorCode::SolverFailure, "QP start point is infeasible");
    if (std::abs(slack) <= feas_tol) {
      const MatrixXd W = rows_of(qp.A, working);
      if (independent_of(W, qp.A.row(i).transpose())) working.push_back(static_cast<int>(i));
    }
  }

  QpResult result;
  const int max_iter = 100 * static_cast<int>(n + m + 1);
  VectorXd lambda;
  for (int iter = 0; iter < max_iter; ++iter) {
    result.iterations = iter + 1;
    const MatrixXd W = rows_of(qp.A, working);
    const VectorXd grad = qp.H * u + qp.g;
    // Step p maximizing the model on the face: -H p + W' lambda = grad, W p = 0.
    KktSolve step = solve_kkt(qp.H, W, grad, VectorXd::Zero(W.rows()));
    const VectorXd& p = step.x;
    lambda = step.lambda;
    if (p.norm() <= 1e-12 * (1.0 + u.norm())) {
      if (working.empty()) break;
      Eigen::Index worst = 0;
      const double min_lambda = lambda.minCoeff(&worst);
      if (min_lambda >= -1e-12 * (1.0 + grad.norm())) break;
      working.erase(working.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) continue;
      const double ap = qp.A.row(i).dot(p);
      if (ap <= 1e-14 * (1.0 + p.norm())) continue;
      const double step_len = std::max(0.0, (qp.b[i] - qp.A.row(i).dot(u)) / ap);
      if (step_len < alpha) {
        alpha = step_len;
        blocking = static_cast<int>(i);
      }
    }
    u += alpha * p;
    if (blocking >= 0) working.push_back(blocking);
    if (iter + 1 == max_iter) fail(ErrorCode::SolverFailure, "QP active-set iteration did not terminate");
  }

  // Re-solve the final face directly to remove accumulated drift.
  const MatrixXd W = rows_of(qp.A, working);
  VectorXd bw(W.rows());
  for (size_t i = 0; i < working.size(); ++i) bw[static_cast<Eigen::Index>(i)] = qp.b[working[i]];
  KktSolve final_solve = solve_kkt(qp.H, W, qp.g, bw);
  result.u = final_solve.x;
  result.multipliers = final_solve.lambda;
  result.active = working;
  result.value = 0.5 * result.u.dot(qp.H * result.u) + qp.g.dot(result.u);
  return result;
}

}  // namespace resalloc

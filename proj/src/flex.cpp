#include "flex.hpp"

#include "dpnd.hpp"
#include "errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace resalloc {
namespace {

void check(const FlexCoefficients& fc) {
  if (!(fc.b_tilde > 0.0)) fail(ErrorCode::NonpositiveCurvature, "b_tilde must be positive");
  if (!(fc.c_tilde >= 0.0)) fail(ErrorCode::InvalidArgument, "overdraft cost must be nonnegative");
}

struct FlexPieces {
  Quadratic free_piece;
  Quadratic kink;
  Quadratic overdrawn;
};

FlexPieces flex_pieces(const MomentAlgebra& al, double a, double b, double c) {
  const double k = a / (2.0 * b);
  const double slope = al.sigma2 + 1.0;
  const double shift = k * al.sigma1;
  FlexPieces p;
  p.free_piece = {-b * (al.second_ref - al.c_c), a * (al.mean_ref - al.mu_c), a * a / (4.0 * b) * al.mu_mu};
  p.kink = p.free_piece + Quadratic{slope * slope, -2.0 * shift * slope, shift * shift} * (-b / al.S);
  p.overdrawn = p.free_piece + Quadratic{0.0, c * slope, -c * shift + c * c * al.S / (4.0 * b)};
  return p;
}

}  // namespace

VectorXd flex_stage_alloc(const PeriodMoments& m, const FlexCoefficients& fc, double x) {
  check(fc);
  const MomentAlgebra al = moment_algebra(m);
  const VectorXd u = (fc.a_tilde / (2.0 * fc.b_tilde)) * al.Minv_mu - x * al.Minv_c;
  const double excess = u.sum() - x;
  if (excess <= 0.0) return u;
  const double shift = fc.c_tilde / (2.0 * fc.b_tilde);
  if (excess - shift * al.S >= 0.0) return u - shift * al.Minv_1;
  return u - (excess / al.S) * al.Minv_1;
}

double flex_hard_limit_cost(const PeriodMoments& m, const FlexCoefficients& fc, double x) {
  check(fc);
  const MomentAlgebra al = moment_algebra(m);
  const VectorXd u = (fc.a_tilde / (2.0 * fc.b_tilde)) * al.Minv_mu - x * al.Minv_c;
  return std::max(0.0, 2.0 * fc.b_tilde * (u.sum() - x) / al.S);
}

PiecewiseQuadratic flex_cost_to_go(const PeriodMoments& m, double a, double b, double c) {
  check({a, b, 0.0, c});
  const MomentAlgebra al = moment_algebra(m);
  const FlexPieces p = flex_pieces(al, a, b, c);
  const double slope = al.sigma2 + 1.0;
  const double shift = a / (2.0 * b) * al.sigma1;
  const double width = c * al.S / (2.0 * b);  // excess range of the kink regime
  if (c == 0.0) return PiecewiseQuadratic(p.free_piece);
  if (std::abs(slope) <= 1e-14) {
    // excess is the constant shift
    if (shift <= 0.0) return PiecewiseQuadratic(p.free_piece);
    return PiecewiseQuadratic(shift >= width ? p.overdrawn : p.kink);
  }
  const double x_free = shift / slope;
  const double x_over = (shift - width) / slope;
  if (slope > 0.0) return PiecewiseQuadratic::make({x_over, x_free}, {p.overdrawn, p.kink, p.free_piece});
  return PiecewiseQuadratic::make({x_free, x_over}, {p.free_piece, p.kink, p.overdrawn});
}

FlexCoefficients flex_recursion(const FlexCoefficients& next, const PeriodMoments& m_next, double a_t, double b_t,
                                double c_t, int regime, bool paper_literal) {
  check(next);
  const MomentAlgebra al = moment_algebra(m_next);
  FlexCoefficients out;
  out.c_tilde = c_t;
  out.regime = regime;
  out.a = a_t;
  out.b = b_t;
  if (paper_literal) {
    const double A = regime ? 1.0 : 0.0;
    const double f = 1.0 - c_t * A;
    out.a_tilde = a_t + next.a * (al.mean_ref - f * al.mu_c);
    out.b_tilde = b_t + next.b * (al.second_ref - 2.0 * f * al.c_c - A);
    out.gamma_tilde = f * next.a_tilde * next.a_tilde / (4.0 * next.b_tilde);
  } else {
    const FlexPieces p = flex_pieces(al, next.a_tilde, next.b_tilde, next.c_tilde);
    const Quadratic& q = regime == 0 ? p.free_piece : regime == 1 ? p.kink : p.overdrawn;
    out.a_tilde = a_t + q.q1;
    out.b_tilde = b_t - q.q2;
    out.gamma_tilde = q.q0 + next.gamma_tilde;
  }
  if (!(out.b_tilde > 0.0)) {
    fail(ErrorCode::NonpositiveCurvature, fmt::format("b_tilde = {:.6e} is not positive", out.b_tilde));
  }
  return out;
}

}  // namespace resalloc

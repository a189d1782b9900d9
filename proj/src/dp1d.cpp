#include "dp1d.hpp"

#include "errors.hpp"
#include "stage_sweep.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace resalloc {
namespace {

double denominator(const Stage1DParams& p) { return p.p2 + p.r0 * p.r0 - 2.0 * p.r0 * p.p1; }

void check_params(const Stage1DParams& p) {
  if (!(p.r0 > 0.0)) fail(ErrorCode::InvalidArgument, "riskless return r0 must be positive");
  if (p.b == 0.0) fail(ErrorCode::LinearStage, "last-period b must be positive");
  if (p.b < 0.0) fail(ErrorCode::InvalidArgument, "b must be nonnegative");
  const double d = denominator(p);
  if (!(d > 1e-12)) {
    fail(ErrorCode::DegenerateDenominator, fmt::format("p2 + r0^2 - 2 r0 p1 = {:.3e}", d));
  }
}

// a E[x_T] - b E[x_T^2] with y = c + d x.
Quadratic value_along(const Stage1DParams& p, double c, double d) {
  const double r0 = p.r0;
  const double ex = p.p1 - r0;
  const double D = denominator(p);
  return {-p.b * (r0 * r0 + 2.0 * r0 * ex * d + D * d * d),
          p.a * (r0 + ex * d) - p.b * (2.0 * r0 * ex * c + 2.0 * D * c * d),
          p.a * ex * c - p.b * D * c * c};
}

}  // namespace

Stage1DParams stage_params_1d(const ProblemSpec& problem, int t) {
  if (problem.n() != 1) fail(ErrorCode::InvalidArgument, "the 1-D solver needs n = 1");
  if (problem.objective.form != ObjectiveForm::Separable) {
    fail(ErrorCode::InvalidArgument, "the 1-D solver needs a Separable objective");
  }
  const Period& period = problem.period(t);
  if (!period.has_atoms()) fail(ErrorCode::MissingAtoms, fmt::format("period {} has no atoms", t + 1));

  Stage1DParams p;
  p.a = problem.objective.a[static_cast<size_t>(t)];
  p.b = problem.objective.b[static_cast<size_t>(t)];
  p.r0 = period.atoms.front().returns[0];
  for (const auto& atom : merge_atoms(period.atoms)) {
    if (std::abs(atom.returns[0] - p.r0) > 1e-12 * (1.0 + std::abs(p.r0))) {
      fail(ErrorCode::InvalidArgument, fmt::format("period {} reference return is not riskless", t + 1));
    }
    const double s = atom.returns[1];
    p.atoms.push_back({s, atom.prob});
    p.p1 += atom.prob * s;
    p.p2 += atom.prob * s * s;
  }
  return p;
}

Stage1DResult stage_T_allocation_1d(const Stage1DParams& p, double x, bool nonneg) {
  check_params(p);
  if (nonneg && x < 0.0) fail(ErrorCode::InvalidArgument, "resource must be nonnegative with nonneg");
  const double r0 = p.r0;
  Stage1DResult out;
  out.y_star = (p.a * (p.p1 - r0) + 2.0 * p.b * x * (r0 * r0 - r0 * p.p1)) / (2.0 * p.b * denominator(p));
  out.y = std::min(out.y_star, x);
  if (nonneg) out.y = std::max(out.y, 0.0);
  const double y = out.y;
  const double mean = r0 * (x - y) + p.p1 * y;
  const double second = r0 * r0 * (x - y) * (x - y) + 2.0 * r0 * p.p1 * y * (x - y) + p.p2 * y * y;
  out.value = p.a * mean - p.b * second;
  return out;
}

double threshold_1d(const Stage1DParams& p) {
  check_params(p);
  const double den = 2.0 * p.b * (p.p2 - p.r0 * p.p1);
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return p.a * (p.p1 - p.r0) / den;
}

PiecewiseQuadratic stage_T_value_1d(const Stage1DParams& p) {
  check_params(p);
  const double D = denominator(p);
  const double c = p.a * (p.p1 - p.r0) / (2.0 * p.b * D);
  const double d = p.r0 * (p.r0 - p.p1) / D;
  const Quadratic interior = value_along(p, c, d);
  const Quadratic corner = value_along(p, 0.0, 1.0);
  const double xs = threshold_1d(p);
  const double gap_slope = d - 1.0;  // y* - x = c + gap_slope x
  if (!std::isfinite(xs) || gap_slope == 0.0) return PiecewiseQuadratic(c > 0.0 ? corner : interior);
  if (gap_slope < 0.0) return PiecewiseQuadratic::make({xs}, {corner, interior});
  return PiecewiseQuadratic::make({xs}, {interior, corner});
}

Dp1dResult backward_induct_1d(const ProblemSpec& problem, bool nonneg) {
  check_problem(problem);
  const int T = problem.horizon;
  std::vector<Stage1DParams> params;
  for (int t = 0; t < T; ++t) {
    params.push_back(stage_params_1d(problem, t));
    const Stage1DParams& p = params.back();
    if (!(denominator(p) > 1e-12)) {
      fail(ErrorCode::DegenerateDenominator, fmt::format("period {} risky return equals the riskless return", t + 1));
    }
  }
  check_params(params.back());

  Dp1dResult out;
  out.policy.resize(static_cast<size_t>(T));
  out.values.resize(static_cast<size_t>(T));
  PiecewiseQuadratic next;
  for (int t = T - 1; t >= 0; --t) {
    const Period& period = problem.period(t);
    const StageProblem stage = scenario_stage(period.atoms, 1, params[static_cast<size_t>(t)].a,
                                              params[static_cast<size_t>(t)].b, next, nonneg);
    StageSolution sol = sweep_stage(stage);

    Threshold1D th;
    th.rule = std::move(sol.rule);
    th.x_star = std::numeric_limits<double>::quiet_NaN();
    const AffineLaw& leftmost = th.rule.laws().front();
    if (std::abs(leftmost.offset[0]) <= 1e-9 && std::abs(leftmost.slope[0] - 1.0) <= 1e-12) {
      th.x_star = th.rule.breakpoints().empty() ? std::numeric_limits<double>::infinity()
                                                : th.rule.breakpoints().front();
    }
    out.policy[static_cast<size_t>(t)] = std::move(th);
    out.values[static_cast<size_t>(t)] = sol.value;
    next = std::move(sol.value);
  }
  return out;
}

}  // namespace resalloc

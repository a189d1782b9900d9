#include "dpnd.hpp"

#include "errors.hpp"
#include "stage_sweep.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace resalloc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_curvature(double b, const char* what) {
  if (!(b > 0.0)) fail(ErrorCode::NonpositiveCurvature, fmt::format("{} = {:.6e} is not positive", what, b));
}

struct TwoRegimes {
  Quadratic unconstrained;
  Quadratic binding;
  double slack_slope = 0.0;  // x - 1'u*(x) = slack_slope x - slack_shift
  double slack_shift = 0.0;
};

TwoRegimes regimes(const MomentAlgebra& al, double a, double b) {
  const double k = a / (2.0 * b);
  TwoRegimes r;
  r.unconstrained = {-b * (al.second_ref - al.c_c), a * (al.mean_ref - al.mu_c), a * a / (4.0 * b) * al.mu_mu};
  r.slack_slope = al.sigma2 + 1.0;
  r.slack_shift = k * al.sigma1;
  // J_unc - (b/S) (k sigma1 - (sigma2 + 1) x)^2
  const Quadratic sq{r.slack_slope * r.slack_slope, -2.0 * r.slack_shift * r.slack_slope,
                     r.slack_shift * r.slack_shift};
  r.binding = r.unconstrained + sq * (-b / al.S);
  return r;
}

bool slack_constant(const TwoRegimes& r) { return std::abs(r.slack_slope) <= 1e-14; }

// Orders (binding, free) pieces along x.
template <class T>
std::pair<std::vector<double>, std::vector<T>> arrange(const TwoRegimes& r, T free_piece, T bind_piece) {
  if (slack_constant(r)) {
    return {{}, {r.slack_shift > 0.0 ? bind_piece : free_piece}};
  }
  const double xb = r.slack_shift / r.slack_slope;
  if (r.slack_slope > 0.0) return {{xb}, {bind_piece, free_piece}};
  return {{xb}, {free_piece, bind_piece}};
}

}  // namespace

MomentAlgebra moment_algebra(const PeriodMoments& m) {
  const ValidationReport report = validate_assumption1(m);
  for (const auto& c : report.checks) {
    if ((c.name == "eqn:condition1" || c.name == "shape" || c.name == "symmetry") && !c.pass) {
      fail(ErrorCode::SingularMoments, c.detail);
    }
  }
  const int n = m.n();
  const MatrixXd M = 0.5 * (m.second_excess + m.second_excess.transpose());
  const Eigen::LDLT<MatrixXd> ldlt(M);
  MomentAlgebra al;
  al.n = n;
  al.mean_ref = m.mean_ref;
  al.second_ref = m.second_ref;
  al.Minv_mu = ldlt.solve(m.mean_excess);
  al.Minv_c = ldlt.solve(m.cross);
  al.Minv_1 = ldlt.solve(VectorXd::Ones(n));
  al.mu_mu = m.mean_excess.dot(al.Minv_mu);
  al.c_c = m.cross.dot(al.Minv_c);
  al.mu_c = m.mean_excess.dot(al.Minv_c);
  al.sigma1 = al.Minv_mu.sum();
  al.sigma2 = al.Minv_c.sum();
  al.S = al.Minv_1.sum();
  return al;
}

VectorXd unconstrained_stage_alloc(const PeriodMoments& m, double a, double b, double x) {
  require_curvature(b, "b");
  const MomentAlgebra al = moment_algebra(m);
  return (a / (2.0 * b)) * al.Minv_mu - x * al.Minv_c;
}

ConstrainedAllocation constrained_stage_alloc(const PeriodMoments& m, double a, double b, double x,
                                              bool paper_literal) {
  require_curvature(b, "b");
  const MomentAlgebra al = moment_algebra(m);
  ConstrainedAllocation out;
  out.u = (a / (2.0 * b)) * al.Minv_mu - x * al.Minv_c;
  const double excess = out.u.sum() - x;
  if (excess <= 0.0) return out;
  out.binding = true;
  if (paper_literal) {
    out.multiplier = excess / al.n;
    out.u.array() -= out.multiplier;
  } else {
    out.multiplier = excess / al.S;
    out.u -= out.multiplier * al.Minv_1;
  }
  return out;
}

PiecewiseQuadratic cost_to_go_T(const PeriodMoments& m, double a, double b) {
  require_curvature(b, "b");
  const TwoRegimes r = regimes(moment_algebra(m), a, b);
  auto [breaks, pieces] = arrange(r, r.unconstrained, r.binding);
  return PiecewiseQuadratic::make(std::move(breaks), std::move(pieces));
}

Quadratic cost_to_go_T_literal(const PeriodMoments& m, double a, double b, int regime) {
  require_curvature(b, "b");
  const MomentAlgebra al = moment_algebra(m);
  const double A = regime ? 1.0 : 0.0;
  const double f = 1.0 - A / al.n;
  return {-b * (al.second_ref - 2.0 * f * al.c_c - A), a * (al.mean_ref - f * al.mu_c),
          f * a * a / (4.0 * b) * al.mu_mu};
}

double regime_boundary_T(const PeriodMoments& m, double a, double b) {
  require_curvature(b, "b");
  const TwoRegimes r = regimes(moment_algebra(m), a, b);
  return slack_constant(r) ? kNaN : r.slack_shift / r.slack_slope;
}

StageRule stage_rule_T(const PeriodMoments& m, double a, double b, bool paper_literal) {
  require_curvature(b, "b");
  const MomentAlgebra al = moment_algebra(m);
  const TwoRegimes r = regimes(al, a, b);
  const double k = a / (2.0 * b);
  const AffineLaw free_law{k * al.Minv_mu, -al.Minv_c};
  AffineLaw bind_law;
  if (paper_literal) {
    const VectorXd ones = VectorXd::Ones(al.n);
    bind_law = {free_law.offset - ones * (r.slack_shift / al.n), free_law.slope + ones * (r.slack_slope / al.n)};
  } else {
    bind_law = {free_law.offset - al.Minv_1 * (r.slack_shift / al.S),
                free_law.slope + al.Minv_1 * (r.slack_slope / al.S)};
  }
  auto [breaks, laws] = arrange(r, free_law, bind_law);
  return StageRule::make(std::move(breaks), std::move(laws));
}

StageCoefficients terminal_coefficients(double a, double b) { return {a, b, 0.0, 0, a, b}; }

StageCoefficients hat_recursion(const StageCoefficients& next, const PeriodMoments& m_next, double a_t, double b_t,
                                int regime, bool paper_literal) {
  StageCoefficients out;
  out.regime = regime ? 1 : 0;
  out.a = a_t;
  out.b = b_t;
  if (paper_literal) {
    require_curvature(next.b_hat, "next b_hat");
    const MomentAlgebra al = moment_algebra(m_next);
    const double A = out.regime;
    const double f = 1.0 - A / al.n;
    out.a_hat = a_t + next.a * (al.mean_ref - f * al.mu_c);
    out.b_hat = b_t + next.b * (al.second_ref - 2.0 * f * al.c_c - A);
    out.gamma_hat = f * next.a_hat * next.a_hat / (4.0 * next.b_hat);
  } else {
    require_curvature(next.b_hat, "next b_hat");
    const TwoRegimes r = regimes(moment_algebra(m_next), next.a_hat, next.b_hat);
    const Quadratic& q = out.regime ? r.binding : r.unconstrained;
    out.a_hat = a_t + q.q1;
    out.b_hat = b_t - q.q2;
    out.gamma_hat = q.q0 + next.gamma_hat;
  }
  require_curvature(out.b_hat, "b_hat");
  return out;
}

namespace {

double borrow_cost_at(const ProblemSpec& problem, int t) {
  return problem.borrow_cost ? (*problem.borrow_cost)[static_cast<size_t>(t)] : -1.0;
}

// Continuation replaced by J(E[x_t]) + kappa Var[x_t], kappa the largest
// curvature of J.
StageProblem mean_state_stage(const PeriodMoments& m, double a, double b, const PiecewiseQuadratic& next,
                              bool nonneg) {
  const int n = m.n();
  double kappa = -std::numeric_limits<double>::infinity();
  for (const auto& q : next.pieces()) kappa = std::max(kappa, q.q2);
  const double bk = b - kappa;
  require_curvature(bk, "b minus continuation curvature");

  const MatrixXd M = 0.5 * (m.second_excess + m.second_excess.transpose());
  StageProblem p;
  p.n = n;
  p.nonneg = nonneg;
  p.base.Quu = -2.0 * bk * M - 2.0 * kappa * m.mean_excess * m.mean_excess.transpose();
  p.base.qux = -2.0 * bk * m.cross - 2.0 * kappa * m.mean_ref * m.mean_excess;
  p.base.qu = a * m.mean_excess;
  p.base.qxx = -bk * m.second_ref - kappa * m.mean_ref * m.mean_ref;
  p.base.qx = a * m.mean_ref;
  p.base.q0 = 0.0;
  p.terms.push_back({1.0, {m.mean_ref, m.mean_excess}, next});
  return p;
}

void literal_induction(const ProblemSpec& problem, DpndResult& out) {
  const int T = problem.horizon;
  const auto& obj = problem.objective;
  std::vector<StageCoefficients> coeff(static_cast<size_t>(T));
  coeff[static_cast<size_t>(T - 1)] = terminal_coefficients(obj.a.back(), obj.b.back());
  for (int t = T - 2; t >= 0; --t) {
    coeff[static_cast<size_t>(t)] = hat_recursion(coeff[static_cast<size_t>(t + 1)], problem.period(t + 1).moments,
                                                  obj.a[static_cast<size_t>(t)], obj.b[static_cast<size_t>(t)], 0,
                                                  true);
  }
  double tail = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const StageCoefficients& c = coeff[static_cast<size_t>(t)];
    const PeriodMoments& m = problem.period(t).moments;
    const Quadratic q = cost_to_go_T_literal(m, c.a_hat, c.b_hat, 0);
    out.values[static_cast<size_t>(t)] = PiecewiseQuadratic(Quadratic{q.q2, q.q1, q.q0 + tail});
    tail += q.q0;
    if (problem.borrow_cost) {
      const MomentAlgebra al = moment_algebra(m);
      const double k = c.a_hat / (2.0 * c.b_hat);
      out.policy[static_cast<size_t>(t)] = StageRule(AffineLaw{k * al.Minv_mu, -al.Minv_c});
    } else {
      out.policy[static_cast<size_t>(t)] = stage_rule_T(m, c.a_hat, c.b_hat, true);
    }
    out.coefficients[static_cast<size_t>(t)] = {c};
  }
}

}  // namespace

DpndResult backward_induct_nd(const ProblemSpec& problem, const DpndOptions& options) {
  check_problem(problem);
  if (problem.objective.form != ObjectiveForm::Separable) {
    fail(ErrorCode::InvalidArgument, "backward induction needs a Separable objective");
  }
  const int T = problem.horizon;
  const int n = problem.n();
  const auto& obj = problem.objective;
  for (int t = 0; t < T; ++t) {
    moment_algebra(problem.period(t).moments);
    if (options.mode == DpMode::ScenarioExact && !problem.period(t).has_atoms()) {
      fail(ErrorCode::MissingAtoms, fmt::format("period {} has no atoms", t + 1));
    }
  }
  if (obj.b.back() == 0.0) fail(ErrorCode::LinearStage, "last-period b must be positive");

  DpndResult out;
  out.policy.resize(static_cast<size_t>(T));
  out.values.resize(static_cast<size_t>(T));
  out.coefficients.resize(static_cast<size_t>(T));

  if (options.paper_literal) {
    if (options.mode != DpMode::PaperRecursion || options.nonneg) {
      fail(ErrorCode::InvalidArgument, "paper-literal mode runs only the moment recursion without nonneg");
    }
    literal_induction(problem, out);
    return out;
  }

  PiecewiseQuadratic next;
  for (int t = T - 1; t >= 0; --t) {
    const size_t ts = static_cast<size_t>(t);
    const double a = obj.a[ts];
    const double b = obj.b[ts];
    const double cost = borrow_cost_at(problem, t);
    const PeriodMoments& m = problem.period(t).moments;

    for (size_t k = 0; k < next.piece_count(); ++k) {
      const Quadratic& q = next.pieces()[k];
      double top = q.q2;
      for (const auto& other : next.pieces()) top = std::max(top, other.q2);
      out.coefficients[ts].push_back({a + q.q1, b - q.q2, q.q0, q.q2 == top ? 0 : 1, a, b});
      if (options.mode == DpMode::PaperRecursion) require_curvature(b - q.q2, "b_hat");
    }

    StageSolution sol;
    const bool closed_form = options.mode == DpMode::PaperRecursion && next.piece_count() == 1 &&
                             !options.nonneg && cost < 0.0;
    if (closed_form) {
      const StageCoefficients& c = out.coefficients[ts].front();
      sol.value = cost_to_go_T(m, c.a_hat, c.b_hat).plus(Quadratic{0.0, 0.0, c.gamma_hat});
      sol.rule = stage_rule_T(m, c.a_hat, c.b_hat);
    } else {
      StageProblem stage = options.mode == DpMode::ScenarioExact
                               ? scenario_stage(problem.period(t).atoms, n, a, b, next, options.nonneg)
                               : mean_state_stage(m, a, b, next, options.nonneg);
      if (cost >= 0.0) {
        stage.budget = false;
        if (cost > 0.0) stage.terms.push_back(overdraft_term(n, cost));
      }
      sol = sweep_stage(stage);
    }
    out.policy[ts] = std::move(sol.rule);
    out.values[ts] = sol.value;
    next = std::move(sol.value);
  }
  return out;
}

}  // namespace resalloc

#include "calibrate.hpp"

#include "errors.hpp"
#include "numfmt.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <optional>

namespace resalloc {
namespace {

size_t horizon(const ProblemSpec& p) { return static_cast<size_t>(p.horizon); }

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

struct FixedPointEval {
  SeparableSolution sol;
  std::vector<double> next;  // w + 2 y E[x]
  double residual = 0.0;
};

Pi3Result pi2_impl(const ProblemSpec& problem, const std::vector<double>& w, const std::vector<double>& y,
                   const SeparableSolver& solver, const Pi3Options& options) {
  const size_t T = horizon(problem);
  if (!(options.damping > 0.0 && options.damping <= 1.0)) fail(ErrorCode::InvalidArgument, "damping must lie in (0, 1]");
  auto evaluate = [&](const std::vector<double>& a) {
    FixedPointEval e{solver(with_separable(problem, a, y)), std::vector<double>(T), 0.0};
    for (size_t t = 0; t < T; ++t) {
      e.next[t] = w[t] + 2.0 * y[t] * e.sol.means[t];
      e.residual = std::max(e.residual, std::abs(e.next[t] - a[t]) / (1.0 + std::abs(a[t])));
    }
    return e;
  };

  Pi3Result out;
  out.b = y;
  std::vector<double> a = w;
  FixedPointEval cur = evaluate(a);
  for (int k = 1; k <= options.max_iter; ++k) {
    TraceRow row{k, a, cur.sol.variances, std::vector<double>(T)};
    for (size_t t = 0; t < T; ++t) row.residuals[t] = std::abs(cur.next[t] - a[t]);
    out.trace.push_back(std::move(row));
    out.residual = cur.residual;
    out.iterations = k;
    if (cur.residual <= options.tol) {
      out.a = a;
      out.objective = 0.0;
      for (size_t t = 0; t < T; ++t) out.objective += w[t] * cur.sol.means[t] - y[t] * cur.sol.variances[t];
      out.solution = std::move(cur.sol);
      return out;
    }
    if (k == options.max_iter) break;

    // Newton step on a - G(a) with a forward-difference Jacobian; the map is
    // piecewise affine in a, so this usually lands on the fixed point.
    std::vector<double> trial;
    try {
      Eigen::MatrixXd J(T, T);
      for (size_t s = 0; s < T; ++s) {
        std::vector<double> as = a;
        const double h = 1e-6 * (1.0 + std::abs(a[s]));
        as[s] += h;
        const FixedPointEval es = evaluate(as);
        for (size_t t = 0; t < T; ++t) J(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) = (es.next[t] - cur.next[t]) / h;
      }
      Eigen::VectorXd r(T);
      for (size_t t = 0; t < T; ++t) r[static_cast<Eigen::Index>(t)] = cur.next[t] - a[t];
      const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T)) - J;
      const Eigen::VectorXd step = A.fullPivLu().solve(r);
      if (step.allFinite()) {
        trial = a;
        for (size_t t = 0; t < T; ++t) trial[t] += step[static_cast<Eigen::Index>(t)];
      }
    } catch (const Error&) {
      trial.clear();
    }
    if (!trial.empty()) {
      try {
        FixedPointEval et = evaluate(trial);
        if (et.residual < cur.residual) {
          a = std::move(trial);
          cur = std::move(et);
          continue;
        }
      } catch (const Error&) {
      }
    }
    for (size_t t = 0; t < T; ++t) a[t] += options.damping * (cur.next[t] - a[t]);
    cur = evaluate(a);
  }
  fail(ErrorCode::NoConvergence,
       fmt::format("fixed point not reached after {} iterations (residual {:.3e})", options.max_iter, out.residual));
}

}  // namespace

std::string trace_to_csv(const std::vector<TraceRow>& trace, const std::string& param_name) {
  std::string out = "iteration";
  const size_t T = trace.empty() ? 0 : trace.front().params.size();
  for (const char* prefix : {"", "var_", "res_"}) {
    for (size_t t = 0; t < T; ++t) {
      out += fmt::format(",{}{}", *prefix ? std::string(prefix) : param_name + "_", t + 1);
    }
  }
  out += '\n';
  for (const auto& row : trace) {
    out += std::to_string(row.iteration);
    for (const auto* v : {&row.params, &row.variances, &row.residuals}) {
      for (size_t t = 0; t < T; ++t) out += "," + (t < v->size() ? format_number((*v)[t]) : std::string("nan"));
    }
    out += '\n';
  }
  return out;
}

ProblemSpec with_separable(const ProblemSpec& problem, std::vector<double> a, std::vector<double> b) {
  ProblemSpec out = problem;
  out.objective = ObjectiveSpec{};
  out.objective.form = ObjectiveForm::Separable;
  out.objective.a = std::move(a);
  out.objective.b = std::move(b);
  return out;
}

Pi3Result pi2_to_pi3(const ProblemSpec& problem, const SeparableSolver& solver, const Pi3Options& options) {
  check_problem(problem);
  if (problem.objective.form != ObjectiveForm::Lagrangian) {
    fail(ErrorCode::InvalidArgument, "pi2_to_pi3 needs a Lagrangian objective");
  }
  return pi2_impl(problem, problem.objective.w, problem.objective.y, solver, options);
}

Pi1Result pi1_to_pi2(const ProblemSpec& problem, const SeparableSolver& solver, const Pi1Options& options) {
  check_problem(problem);
  if (problem.objective.form != ObjectiveForm::VarianceConstrained) {
    fail(ErrorCode::InvalidArgument, "pi1_to_pi2 needs a VarianceConstrained objective");
  }
  const size_t T = horizon(problem);
  const auto& w = problem.objective.w;
  const auto& alpha = problem.objective.alpha;
  double wmax = 0.0;
  for (double v : w) wmax = std::max(wmax, std::abs(v));

  Pi1Result out;
  std::vector<double> y(T, 0.0);
  std::optional<Pi3Result> cur;
  int solves = 0;

  auto detail = [&] {
    std::string d;
    for (size_t t = 0; t < T; ++t) {
      const double var = cur ? cur->solution.variances[t] : std::nan("");
      d += fmt::format(" t={}: y={:.6g} Var={:.6g} alpha={:.6g};", t + 1, y[t], var, alpha[t]);
    }
    return d;
  };
  // Solves the Lagrangian problem at y; an unsolvable point counts as infinitely risky.
  auto solve_at = [&](const std::vector<double>& yy) -> std::optional<Pi3Result> {
    if (++solves > options.max_iter) {
      fail(ErrorCode::NoConvergence, fmt::format("multiplier search stopped after {} solves;{}", options.max_iter, detail()));
    }
    TraceRow row{solves, yy, {}, std::vector<double>(T, std::nan(""))};
    std::optional<Pi3Result> r;
    try {
      r = pi2_impl(problem, w, yy, solver, options.inner);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaError || e.code() == ErrorCode::MissingAtoms) throw;
    }
    if (r) {
      row.variances = r->solution.variances;
      for (size_t t = 0; t < T; ++t) row.residuals[t] = r->solution.variances[t] - alpha[t];
    }
    out.trace.push_back(std::move(row));
    return r;
  };
  auto var_of = [&](const std::optional<Pi3Result>& r, size_t t) { return r ? r->solution.variances[t] : INFINITY; };
  auto converged = [&] {
    if (!cur) return false;
    const double ymax = max_of(y);
    for (size_t t = 0; t < T; ++t) {
      const double var = cur->solution.variances[t];
      if (var > (1.0 + options.feas_tol) * alpha[t]) return false;
      if (y[t] * (alpha[t] - var) > options.slack_tol * alpha[t] * ymax) return false;
    }
    return true;
  };
  // Var_t is nonincreasing in y_t, so each coordinate is set by bisection
  // into a band inside both tolerances; sweeps repeat until all hold at once.
  auto in_band = [&](double var, size_t t) {
    return var <= (1.0 + 0.5 * options.feas_tol) * alpha[t] && var >= (1.0 - 0.5 * options.slack_tol) * alpha[t];
  };

  cur = solve_at(y);
  while (!converged()) {
    // last period first: the solvers reject b_T = 0 once an earlier b_t > 0
    for (size_t t = T; t-- > 0;) {
      const double var = var_of(cur, t);
      if (in_band(var, t) || (y[t] == 0.0 && var <= alpha[t])) continue;
      std::vector<double> trial = y;
      double lo = 0.0, hi = 0.0;
      std::optional<Pi3Result> hi_sol;
      if (var > alpha[t]) {
        lo = y[t];
        hi = std::max(2.0 * y[t], 1e-3 * std::max(wmax, 1e-12) / std::sqrt(alpha[t]));
        for (;;) {
          trial[t] = hi;
          hi_sol = solve_at(trial);
          if (var_of(hi_sol, t) <= alpha[t] || in_band(var_of(hi_sol, t), t)) break;
          lo = hi;
          hi *= 4.0;
        }
      } else {
        hi = y[t];
        hi_sol = cur;
        trial[t] = 0.0;
        std::optional<Pi3Result> zero = solve_at(trial);
        if (var_of(zero, t) <= alpha[t]) {
          y = trial;
          cur = std::move(zero);
          continue;
        }
      }
      double others = 0.0;
      for (size_t s = 0; s < T; ++s) {
        if (s != t) others = std::max(others, y[s]);
      }
      // y_t = 0 itself may be unsolvable next to positive multipliers; a
      // value that already meets the slackness test is as good
      auto negligible = [&] {
        return lo == 0.0 && others > 0.0 && hi * (alpha[t] - var_of(hi_sol, t)) <= 0.5 * options.slack_tol * alpha[t] * others;
      };
      // lo is too loose, hi is tight enough
      while (!in_band(var_of(hi_sol, t), t) && !negligible() && hi > lo * (1.0 + 1e-12)) {
        trial[t] = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
        std::optional<Pi3Result> mid = solve_at(trial);
        if (var_of(mid, t) <= alpha[t]) {
          hi = trial[t];
          hi_sol = std::move(mid);
        } else if (in_band(var_of(mid, t), t)) {
          hi = trial[t];
          hi_sol = std::move(mid);
          break;
        } else {
          lo = trial[t];
        }
      }
      y[t] = hi;
      cur = std::move(hi_sol);
    }
    if (!cur) fail(ErrorCode::NoConvergence, "no solvable multiplier found;" + detail());
  }

  out.y = y;
  out.iterations = solves;
  out.dual = cur->objective;
  for (size_t t = 0; t < T; ++t) {
    out.violation.push_back(cur->solution.variances[t] - alpha[t]);
    out.primal += w[t] * cur->solution.means[t];
    out.dual += y[t] * alpha[t];
  }
  out.gap = out.dual - out.primal;
  out.pi2 = std::move(*cur);
  return out;
}

ChanceResult chance_to_meanvar(const ProblemSpec& problem, const ChanceSpec& spec, const SeparableSolver& solver,
                               const ChanceOptions& options) {
  check_problem(problem);
  const size_t T = horizon(problem);
  if (spec.w.size() != T || spec.d.size() != T) fail(ErrorCode::InvalidArgument, "chance weights and targets need T entries");
  for (size_t t = 0; t < T; ++t) {
    if (!(spec.w[t] >= 0.0) || !std::isfinite(spec.w[t])) fail(ErrorCode::InvalidArgument, "chance weights must be nonnegative");
    if (!std::isfinite(spec.d[t])) fail(ErrorCode::InvalidArgument, "chance targets must be finite");
  }

  ChanceResult out;
  out.w = spec.w;
  const SeparableSolution mean_only = solver(with_separable(problem, spec.w, std::vector<double>(T, 0.0)));
  out.means_initial = mean_only.means;
  std::vector<double> m = mean_only.means;

  auto reweight = [&](std::vector<double>& y, std::vector<int>& skipped) {
    y.assign(T, 0.0);
    skipped.clear();
    for (size_t t = 0; t < T; ++t) {
      const double gap = spec.d[t] - m[t];
      if (std::abs(gap) < options.min_distance) {
        skipped.push_back(static_cast<int>(t) + 1);
      } else {
        y[t] = spec.w[t] / (gap * gap);
      }
    }
  };

  for (int r = 1; r <= options.max_rounds; ++r) {
    reweight(out.y, out.skipped);
    out.pi2 = pi2_impl(problem, spec.w, out.y, solver, options.inner);
    const auto& m_new = out.pi2.solution.means;
    TraceRow row{r, out.y, out.pi2.solution.variances, std::vector<double>(T)};
    double change = 0.0;
    for (size_t t = 0; t < T; ++t) {
      row.residuals[t] = m_new[t] - m[t];
      change = std::max(change, std::abs(row.residuals[t]));
    }
    out.trace.push_back(std::move(row));
    m = m_new;
    out.rounds = r;
    if (change <= options.tol) break;
  }

  std::vector<double> y_final;
  std::vector<int> still;
  reweight(y_final, still);
  if (!still.empty()) {
    fail(ErrorCode::TargetAtMean, fmt::format("target equals the mean trajectory in period {}", still.front()));
  }
  for (size_t t = 0; t < T; ++t) {
    const double gap = spec.d[t] - m[t];
    out.bound.push_back(out.pi2.solution.variances[t] / (gap * gap));
  }
  return out;
}

}  // namespace resalloc

#include "solve.hpp"

#include "dp1d.hpp"
#include "errors.hpp"
#include "oracle.hpp"
#include "simulate.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace resalloc {
namespace {

bool all_atoms(const ProblemSpec& p) {
  for (const auto& period : p.model.periods) {
    if (!period.has_atoms()) return false;
  }
  return true;
}

double leaf_count(const ProblemSpec& p) {
  double leaves = 1.0;
  for (const auto& period : p.model.periods) leaves *= static_cast<double>(period.atoms.size());
  return leaves;
}

bool riskless_reference(const ProblemSpec& p) {
  for (const auto& period : p.model.periods) {
    const double r0 = period.atoms.front().returns[0];
    for (const auto& atom : period.atoms) {
      if (std::abs(atom.returns[0] - r0) > 1e-12 * (1.0 + std::abs(r0))) return false;
    }
  }
  return true;
}

void fill_moments(const ProblemSpec& problem, SolveReport& r) {
  const size_t T = static_cast<size_t>(problem.horizon);
  if (all_atoms(problem) && leaf_count(problem) <= 1e6) {
    const Evaluation ev = oracle_evaluate(problem, policy_fn(r.policy));
    r.moments_method = "tree";
    r.means = ev.means;
    r.seconds = ev.seconds;
    r.variances = ev.variances;
    r.overdraft = ev.overdraft;
    r.objective = ev.objective;
    return;
  }
  try {
    const MomentTrajectory mt = propagate_moments(problem, r.policy);
    r.moments_method = "affine";
    r.means = mt.means;
    r.seconds = mt.seconds;
    r.variances = mt.variances;
    r.overdraft = mt.overdraft;
    r.objective = mt.objective;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RegimeCrossing) throw;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.moments_method = "none";
    r.means.assign(T, nan);
    r.seconds.assign(T, nan);
    r.variances.assign(T, nan);
    r.overdraft.assign(T, nan);
    r.objective = nan;
  }
}

bool all_linear(const ProblemSpec& p) {
  for (double b : p.objective.b) {
    if (b != 0.0) return false;
  }
  return true;
}

// b = 0 everywhere: the value is k_t x and each stage maximizes the linear
// form (a_t + k_{t+1}) E[e x + P'u] over the budget set.
void linear_induction(const ProblemSpec& problem, bool nonneg, SolveReport& r) {
  const int T = problem.horizon;
  const int n = problem.n();
  r.policy.resize(static_cast<size_t>(T));
  r.values.resize(static_cast<size_t>(T));
  double k_next = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const PeriodMoments& m = problem.period(t).moments;
    const double kappa = problem.objective.a[static_cast<size_t>(t)] + k_next;
    const VectorXd d = kappa * m.mean_excess;
    VectorXd slope = VectorXd::Zero(n);
    double gain = 0.0;  // value per unit of x from the allocation
    Eigen::Index best = 0;
    const double dmax = d.maxCoeff(&best);
    if (nonneg) {
      if (dmax > 0.0) {
        slope[best] = 1.0;
        gain = dmax;
      }
    } else {
      const double spread = dmax - d.minCoeff();
      if (spread > 1e-12 * (1.0 + std::abs(dmax)) || dmax < 0.0) {
        fail(ErrorCode::UnboundedAbove, fmt::format("period {} expected-return stage is unbounded", t + 1));
      }
      if (dmax > 0.0) {
        slope.setConstant(1.0 / n);
        gain = dmax;
      }
    }
    r.policy[static_cast<size_t>(t)] = StageRule(AffineLaw{VectorXd::Zero(n), slope});
    k_next = kappa * m.mean_ref + gain;
    r.values[static_cast<size_t>(t)] = PiecewiseQuadratic(Quadratic{0.0, k_next, 0.0});
  }
}

void restate_objective(const ProblemSpec& original, SolveReport& r) {
  if (r.moments_method != "none") r.objective = objective_value(original, r.means, r.seconds, r.overdraft);
}

}  // namespace

SolveReport solve_separable(const ProblemSpec& problem, const SolveOptions& options) {
  check_problem(problem);
  if (problem.objective.form != ObjectiveForm::Separable) {
    fail(ErrorCode::InvalidArgument, "solve_separable needs a Separable objective");
  }
  SolveReport r;
  r.a = problem.objective.a;
  r.b = problem.objective.b;

  const bool use_1d = options.scenario_exact && !options.paper_literal && problem.n() == 1 && all_atoms(problem) &&
                      !problem.borrow_cost && riskless_reference(problem);
  if (all_linear(problem) && !problem.borrow_cost && !options.paper_literal) {
    linear_induction(problem, options.nonneg, r);
    r.method = "linear";
  } else if (use_1d) {
    Dp1dResult res = backward_induct_1d(problem, options.nonneg);
    r.method = "dp1d";
    for (auto& th : res.policy) {
      r.thresholds.push_back(th.x_star);
      r.policy.push_back(std::move(th.rule));
    }
    r.values = std::move(res.values);
  } else {
    DpndOptions o;
    o.mode = options.scenario_exact ? DpMode::ScenarioExact : DpMode::PaperRecursion;
    o.paper_literal = options.paper_literal;
    o.nonneg = options.nonneg;
    DpndResult res = backward_induct_nd(problem, o);
    r.method = options.paper_literal ? "dpnd-literal" : (options.scenario_exact ? "dpnd-scenario" : "dpnd-recursion");
    r.policy = std::move(res.policy);
    r.values = std::move(res.values);
    r.coefficients = std::move(res.coefficients);
  }
  r.separable_value = r.values.front()(problem.x0);
  fill_moments(problem, r);
  return r;
}

SeparableSolver make_solver(const SolveOptions& options) {
  return [options](const ProblemSpec& problem) {
    SolveReport r = solve_separable(problem, options);
    if (r.moments_method == "none") {
      fail(ErrorCode::RegimeCrossing, "exact moments are unavailable for the solved policy");
    }
    return SeparableSolution{std::move(r.policy), r.separable_value, std::move(r.means), std::move(r.variances)};
  };
}

SolveReport solve(const ProblemSpec& problem, const SolveOptions& options) {
  check_problem(problem);
  switch (problem.objective.form) {
    case ObjectiveForm::Separable: return solve_separable(problem, options);
    case ObjectiveForm::Lagrangian: {
      Pi3Result pi3 = pi2_to_pi3(problem, make_solver(options), options.pi3);
      SolveReport r = solve_separable(with_separable(problem, pi3.a, pi3.b), options);
      r.y = problem.objective.y;
      restate_objective(problem, r);
      r.pi3 = std::move(pi3);
      return r;
    }
    case ObjectiveForm::VarianceConstrained: {
      Pi1Result pi1 = pi1_to_pi2(problem, make_solver(options), options.pi1);
      SolveReport r = solve_separable(with_separable(problem, pi1.pi2.a, pi1.pi2.b), options);
      r.y = pi1.y;
      restate_objective(problem, r);
      r.pi1 = std::move(pi1);
      return r;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown objective form");
}

std::vector<CompareRow> compare_budget(const ProblemSpec& problem, const SolveOptions& options) {
  SolveOptions enforced = options;
  enforced.paper_literal = false;
  const SolveReport r = solve(problem, enforced);

  ProblemSpec uncapped = with_separable(problem, r.a, r.b);
  uncapped.borrow_cost = std::vector<double>(static_cast<size_t>(problem.horizon), 0.0);
  DpndOptions lit;
  lit.paper_literal = true;
  const DpndResult free = backward_induct_nd(uncapped, lit);

  std::vector<CompareRow> rows;
  for (int t = 0; t < problem.horizon; ++t) {
    const size_t ts = static_cast<size_t>(t);
    CompareRow row;
    row.period = t + 1;
    row.x = t == 0 ? problem.x0 : r.means[ts - 1];
    row.constrained = r.policy[ts](row.x);
    row.free = free.policy[ts](row.x);
    row.constrained_sum = row.constrained.sum();
    row.free_sum = row.free.sum();
    row.free_infeasible = row.free_sum > row.x + 1e-9 * (1.0 + std::abs(row.x));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace resalloc

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace resalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One point of a finite joint return distribution. `returns` is ordered
// (reference, entity 1, ..., entity n): gross per-unit returns for one period.
struct ScenarioAtom {
  double prob = 0.0;
  VectorXd returns;
};

// First and second moments of the reference return e and the excess-return
// vector P = (e_1 - e, ..., e_n - e).
struct PeriodMoments {
  double mean_ref = 0.0;    // E[e]
  double second_ref = 0.0;  // E[e^2]
  VectorXd mean_excess;     // E[P]
  VectorXd cross;           // E[e P]
  MatrixXd second_excess;   // E[P P']

  int n() const { return static_cast<int>(mean_excess.size()); }
};

struct Period {
  std::vector<ScenarioAtom> atoms;  // empty for moment-only periods
  PeriodMoments moments;            // always populated

  bool has_atoms() const { return !atoms.empty(); }
};

struct ReturnModel {
  int n = 0;
  std::vector<Period> periods;
};

enum class ObjectiveForm { VarianceConstrained, Lagrangian, Separable };

std::string_view objective_form_name(ObjectiveForm form);

struct ObjectiveSpec {
  ObjectiveForm form = ObjectiveForm::Separable;
  std::vector<double> w;
  std::vector<double> alpha;
  std::vector<double> y;
  std::vector<double> a;
  std::vector<double> b;
};

struct ProblemSpec {
  int horizon = 0;
  double x0 = 0.0;
  ReturnModel model;
  ObjectiveSpec objective;
  std::optional<std::vector<double>> borrow_cost;

  int n() const { return model.n; }
  const Period& period(int t) const { return model.periods.at(static_cast<size_t>(t)); }
};

// Exact probability-weighted moments. Sums use Neumaier compensation so the
// result does not depend on atom order beyond the last few ulps.
PeriodMoments moments_from_scenarios(std::span<const ScenarioAtom> atoms, int n);

// The (n+1)x(n+1) matrix E[e e'] over (reference, entity 1..n).
MatrixXd raw_second_moment(std::span<const ScenarioAtom> atoms, int n);

struct ValidationCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;  // offending or witnessing quantity
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool pass() const;
  const ValidationCheck* failed() const;
};

inline constexpr double kPdRelativeTolerance = 1e-10;

// Symmetry, positive definiteness of E[PP'] and the Schur-complement condition
// on E[e^2]. Never throws.
ValidationReport validate_assumption1(const PeriodMoments& m);

// Structural invariants of a ProblemSpec (lengths, signs, finiteness, atom
// normalization, atom/moment agreement). Throws SchemaError.
void check_problem(const ProblemSpec& problem);

// Per-period moment validity reports, in period order.
std::vector<ValidationReport> validate_problem(const ProblemSpec& problem);

// Objective of the declared form from per-period E[x_t], E[x_t^2] and the
// expected overdraft E[(1'u_t - x_{t-1})^+] (charged at borrow_cost).
double objective_value(const ProblemSpec& problem, std::span<const double> means, std::span<const double> seconds,
                       std::span<const double> overdraft);

// Atoms with identical return vectors merged; order of first appearance kept.
std::vector<ScenarioAtom> merge_atoms(std::span<const ScenarioAtom> atoms);

}  // namespace resalloc

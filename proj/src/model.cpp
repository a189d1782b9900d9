#include "model.hpp"

#include "errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace resalloc {
namespace {

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void check_atoms(std::span<const ScenarioAtom> atoms, int n) {
  if (atoms.empty()) fail(ErrorCode::EmptyAtomList, "period has no scenario atoms");
  CompensatedSum total;
  for (const auto& atom : atoms) {
    if (!(atom.prob > 0.0) || atom.prob > 1.0 || !std::isfinite(atom.prob)) {
      fail(ErrorCode::ProbabilityNotNormalized,
           fmt::format("atom probability {} outside (0, 1]", atom.prob));
    }
    if (atom.returns.size() != n + 1) {
      fail(ErrorCode::SchemaError,
           fmt::format("atom has {} returns, expected {}", atom.returns.size(), n + 1));
    }
    if (!atom.returns.allFinite()) fail(ErrorCode::SchemaError, "atom returns must be finite");
    total.add(atom.prob);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    fail(ErrorCode::ProbabilityNotNormalized,
         fmt::format("atom probabilities sum to {:.17g}", total.value()));
  }
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::string_view objective_form_name(ObjectiveForm form) {
  switch (form) {
    case ObjectiveForm::VarianceConstrained: return "VarianceConstrained";
    case ObjectiveForm::Lagrangian: return "Lagrangian";
    case ObjectiveForm::Separable: return "Separable";
  }
  return "Unknown";
}

PeriodMoments moments_from_scenarios(std::span<const ScenarioAtom> atoms, int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "entity count n must be at least 1");
  check_atoms(atoms, n);

  CompensatedSum mean_ref;
  CompensatedSum second_ref;
  std::vector<CompensatedSum> mean_excess(n);
  std::vector<CompensatedSum> cross(n);
  std::vector<CompensatedSum> second(static_cast<size_t>(n) * n);
  for (const auto& atom : atoms) {
    const double p = atom.prob;
    const double e = atom.returns[0];
    mean_ref.add(p * e);
    second_ref.add(p * e * e);
    for (int i = 0; i < n; ++i) {
      const double pi = atom.returns[i + 1] - e;
      mean_excess[i].add(p * pi);
      cross[i].add(p * e * pi);
      for (int j = 0; j < n; ++j) {
        const double pj = atom.returns[j + 1] - e;
        second[static_cast<size_t>(i) * n + j].add(p * pi * pj);
      }
    }
  }

  PeriodMoments m;
  m.mean_ref = mean_ref.value();
  m.second_ref = second_ref.value();
  m.mean_excess.resize(n);
  m.cross.resize(n);
  m.second_excess.resize(n, n);
  for (int i = 0; i < n; ++i) {
    m.mean_excess[i] = mean_excess[i].value();
    m.cross[i] = cross[i].value();
    for (int j = 0; j < n; ++j) m.second_excess(i, j) = second[static_cast<size_t>(i) * n + j].value();
  }
  return m;
}

MatrixXd raw_second_moment(std::span<const ScenarioAtom> atoms, int n) {
  check_atoms(atoms, n);
  MatrixXd out = MatrixXd::Zero(n + 1, n + 1);
  for (const auto& atom : atoms) out += atom.prob * atom.returns * atom.returns.transpose();
  return out;
}

bool ValidationReport::pass() const { return failed() == nullptr; }

const ValidationCheck* ValidationReport::failed() const {
  for (const auto& c : checks) {
    if (!c.pass) return &c;
  }
  return nullptr;
}

ValidationReport validate_assumption1(const PeriodMoments& m) {
  ValidationReport report;
  const MatrixXd& M = m.second_excess;
  const int n = m.n();

  const bool shaped = n >= 1 && M.rows() == n && M.cols() == n && m.cross.size() == n;
  if (!shaped) {
    report.checks.push_back({"shape", false, 0.0, "moment blocks have inconsistent dimensions"});
    return report;
  }

  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  report.checks.push_back({"symmetry", asym <= 1e-10, asym,
                           fmt::format("max |E[PP'] - E[PP']'| = {:.3e}", asym)});

  const MatrixXd sym = 0.5 * (M + M.transpose());
  const double trace = sym.trace();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const bool pd = std::isfinite(min_eig) && trace > 0.0 && min_eig > kPdRelativeTolerance * trace;
  report.checks.push_back({"eqn:condition1", pd, min_eig,
                           fmt::format("min eigenvalue of E[PP'] = {:.6e} (trace {:.6e})", min_eig, trace)});

  if (!pd) {
    report.checks.push_back({"eqn:condition2", false, std::nan(""),
                             "not evaluated: E[PP'] is not positive definite"});
    return report;
  }
  const double schur = m.second_ref - m.cross.dot(sym.ldlt().solve(m.cross));
  const bool ok = std::isfinite(schur) && schur > kPdRelativeTolerance * std::max(1.0, std::abs(m.second_ref));
  report.checks.push_back({"eqn:condition2", ok, schur,
                           fmt::format("E[e^2] - E[eP']E^-1[PP']E[eP] = {:.6e}", schur)});
  return report;
}

void check_problem(const ProblemSpec& problem) {
  const int T = problem.horizon;
  const int n = problem.model.n;
  if (T < 1) fail(ErrorCode::SchemaError, "horizon must be at least 1");
  if (n < 1) fail(ErrorCode::SchemaError, "n must be at least 1");
  if (!std::isfinite(problem.x0)) fail(ErrorCode::SchemaError, "x0 must be finite");
  if (static_cast<int>(problem.model.periods.size()) != T) {
    fail(ErrorCode::SchemaError, fmt::format("expected {} periods, found {}", T,
                                             problem.model.periods.size()));
  }

  const auto& obj = problem.objective;
  auto need = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != T) {
      fail(ErrorCode::SchemaError, fmt::format("objective.{} must have {} entries", name, T));
    }
    if (!all_finite(v)) fail(ErrorCode::SchemaError, fmt::format("objective.{} must be finite", name));
  };
  auto absent = [&](const std::vector<double>& v, const char* name) {
    if (!v.empty()) {
      fail(ErrorCode::SchemaError,
           fmt::format("objective.{} is not allowed for form {}", name, objective_form_name(obj.form)));
    }
  };
  switch (obj.form) {
    case ObjectiveForm::VarianceConstrained:
      need(obj.w, "w");
      need(obj.alpha, "alpha");
      absent(obj.y, "y");
      absent(obj.a, "a");
      absent(obj.b, "b");
      for (double al : obj.alpha) {
        if (!(al > 0.0)) fail(ErrorCode::SchemaError, "alpha entries must be positive");
      }
      break;
    case ObjectiveForm::Lagrangian:
      need(obj.w, "w");
      need(obj.y, "y");
      absent(obj.alpha, "alpha");
      absent(obj.a, "a");
      absent(obj.b, "b");
      for (double y : obj.y) {
        if (y < 0.0) fail(ErrorCode::SchemaError, "y entries must be nonnegative");
      }
      break;
    case ObjectiveForm::Separable:
      if (!obj.w.empty()) need(obj.w, "w");
      need(obj.a, "a");
      need(obj.b, "b");
      absent(obj.alpha, "alpha");
      absent(obj.y, "y");
      for (double b : obj.b) {
        if (b < 0.0) fail(ErrorCode::SchemaError, "b entries must be nonnegative");
      }
      break;
  }

  if (problem.borrow_cost) {
    if (static_cast<int>(problem.borrow_cost->size()) != T) {
      fail(ErrorCode::SchemaError, fmt::format("borrow_cost must have {} entries", T));
    }
    for (double c : *problem.borrow_cost) {
      if (!std::isfinite(c) || c < 0.0) fail(ErrorCode::SchemaError, "borrow_cost entries must be finite and >= 0");
    }
  }

  for (int t = 0; t < T; ++t) {
    const Period& p = problem.model.periods[t];
    const PeriodMoments& m = p.moments;
    if (m.n() != n || m.cross.size() != n || m.second_excess.rows() != n || m.second_excess.cols() != n) {
      fail(ErrorCode::SchemaError, fmt::format("period {} moments have wrong dimension", t + 1));
    }
    if (!std::isfinite(m.mean_ref) || !std::isfinite(m.second_ref) || !m.mean_excess.allFinite() ||
        !m.cross.allFinite() || !m.second_excess.allFinite()) {
      fail(ErrorCode::SchemaError, fmt::format("period {} moments must be finite", t + 1));
    }
    if (p.has_atoms()) {
      const PeriodMoments from_atoms = moments_from_scenarios(p.atoms, n);
      const double diff = std::max({std::abs(from_atoms.mean_ref - m.mean_ref),
                                    std::abs(from_atoms.second_ref - m.second_ref),
                                    (from_atoms.mean_excess - m.mean_excess).cwiseAbs().maxCoeff(),
                                    (from_atoms.cross - m.cross).cwiseAbs().maxCoeff(),
                                    (from_atoms.second_excess - m.second_excess).cwiseAbs().maxCoeff()});
      if (diff > 1e-9) {
        fail(ErrorCode::SchemaError,
             fmt::format("period {} stored moments disagree with atoms by {:.3e}", t + 1, diff));
      }
    }
  }
}

std::vector<ValidationReport> validate_problem(const ProblemSpec& problem) {
  std::vector<ValidationReport> out;
  out.reserve(problem.model.periods.size());
  for (const auto& p : problem.model.periods) out.push_back(validate_assumption1(p.moments));
  return out;
}

double objective_value(const ProblemSpec& problem, std::span<const double> means, std::span<const double> seconds,
                       std::span<const double> overdraft) {
  const auto& obj = problem.objective;
  const size_t T = static_cast<size_t>(problem.horizon);
  if (means.size() != T || seconds.size() != T) fail(ErrorCode::InvalidArgument, "moment paths must have T entries");
  CompensatedSum total;
  for (size_t t = 0; t < T; ++t) {
    const double var = seconds[t] - means[t] * means[t];
    switch (obj.form) {
      case ObjectiveForm::Separable: total.add(obj.a[t] * means[t] - obj.b[t] * seconds[t]); break;
      case ObjectiveForm::Lagrangian: total.add(obj.w[t] * means[t] - obj.y[t] * var); break;
      case ObjectiveForm::VarianceConstrained: total.add(obj.w[t] * means[t]); break;
    }
    if (problem.borrow_cost && t < overdraft.size()) total.add(-(*problem.borrow_cost)[t] * overdraft[t]);
  }
  return total.value();
}

std::vector<ScenarioAtom> merge_atoms(std::span<const ScenarioAtom> atoms) {
  std::vector<ScenarioAtom> out;
  for (const auto& atom : atoms) {
    bool merged = false;
    for (auto& existing : out) {
      if (existing.returns.size() == atom.returns.size() && existing.returns == atom.returns) {
        existing.prob += atom.prob;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(atom);
  }
  return out;
}

}  // namespace resalloc

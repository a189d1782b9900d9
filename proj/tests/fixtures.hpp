#pragma once

#include "model.hpp"

#include <random>
#include <vector>

namespace resalloc::testing {

inline ScenarioAtom atom(double prob, std::initializer_list<double> returns) {
  ScenarioAtom a;
  a.prob = prob;
  a.returns = VectorXd(static_cast<Eigen::Index>(returns.size()));
  Eigen::Index i = 0;
  for (double r : returns) a.returns[i++] = r;
  return a;
}

inline Period period_from_atoms(std::vector<ScenarioAtom> atoms, int n) {
  Period p;
  p.moments = moments_from_scenarios(atoms, n);
  p.atoms = std::move(atoms);
  return p;
}

inline ProblemSpec separable(int n, double x0, std::vector<Period> periods, std::vector<double> a,
                             std::vector<double> b) {
  ProblemSpec p;
  p.horizon = static_cast<int>(periods.size());
  p.x0 = x0;
  p.model.n = n;
  p.model.periods = std::move(periods);
  p.objective.form = ObjectiveForm::Separable;
  p.objective.a = std::move(a);
  p.objective.b = std::move(b);
  return p;
}

// r0 = 1.05, risky {1.6, 0.8} at 1/2 each.
inline std::vector<ScenarioAtom> ref1d_atoms() { return {atom(0.5, {1.05, 1.6}), atom(0.5, {1.05, 0.8})}; }

inline ProblemSpec ref1d(double x0, int T = 1, double a = 1.0, double b = 0.01) {
  std::vector<Period> ps(static_cast<size_t>(T), period_from_atoms(ref1d_atoms(), 1));
  return separable(1, x0, ps, std::vector<double>(static_cast<size_t>(T), a),
                   std::vector<double>(static_cast<size_t>(T), b));
}

// r0 = 1, risky {1.4, 0.8}, a = 1, b = 0.05 in both periods.
inline ProblemSpec two_period(double x0) {
  const Period p = period_from_atoms({atom(0.5, {1.0, 1.4}), atom(0.5, {1.0, 0.8})}, 1);
  return separable(1, x0, {p, p}, {1.0, 1.0}, {0.05, 0.05});
}

// Moments M = [[0.2, 0.02], [0.02, 0.3]], mu = c = (0.1, 0.2), E[e] = 1, E[e^2] = 1.01.
inline PeriodMoments ref_moments() {
  PeriodMoments m;
  m.mean_ref = 1.0;
  m.second_ref = 1.01;
  m.mean_excess = VectorXd(2);
  m.mean_excess << 0.1, 0.2;
  m.cross = m.mean_excess;
  m.second_excess = MatrixXd(2, 2);
  m.second_excess << 0.2, 0.02, 0.02, 0.3;
  return m;
}

// Six equiprobable atoms reproducing ref_moments exactly.
inline std::vector<ScenarioAtom> six_atoms() {
  const double p = 1.0 / 6.0;
  return {atom(p, {1.173205080756888, 1.273205080756888, 1.3732050807568879}),
          atom(p, {0.8267949192431122, 0.9267949192431122, 1.0267949192431123}),
          atom(p, {1.0, 1.854983443527075, 1.2}),
          atom(p, {1.0, 0.34501655647292495, 1.2}),
          atom(p, {1.0, 1.1, 2.0831760866327844}),
          atom(p, {1.0, 1.1, 0.31682391336721527})};
}

inline ProblemSpec six_atom_problem(int T, double x0, double a = 1.0, double b = 0.05) {
  std::vector<Period> ps(static_cast<size_t>(T), period_from_atoms(six_atoms(), 2));
  return separable(2, x0, ps, std::vector<double>(static_cast<size_t>(T), a),
                   std::vector<double>(static_cast<size_t>(T), b));
}

inline std::vector<double> random_probs(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> p(static_cast<size_t>(k));
  double s = 0.0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  return p;
}

// k atoms over (reference, n entities); riskless reference when r0 > 0.
inline std::vector<ScenarioAtom> random_atoms(std::mt19937_64& rng, int n, int k, double r0 = 0.0) {
  std::uniform_real_distribution<double> ref(0.95, 1.1);
  std::uniform_real_distribution<double> excess(-0.4, 0.5);
  const auto probs = random_probs(rng, k);
  std::vector<ScenarioAtom> atoms;
  for (int j = 0; j < k; ++j) {
    ScenarioAtom a;
    a.prob = probs[static_cast<size_t>(j)];
    a.returns = VectorXd(n + 1);
    a.returns[0] = r0 > 0.0 ? r0 : ref(rng);
    for (int i = 1; i <= n; ++i) a.returns[i] = a.returns[0] + excess(rng);
    atoms.push_back(std::move(a));
  }
  return atoms;
}

inline ProblemSpec random_problem(std::mt19937_64& rng, int T, int n, int k, bool riskless = false) {
  std::uniform_real_distribution<double> ua(0.5, 2.0), ub(0.005, 0.05), ux(1.0, 40.0), ur(1.0, 1.08);
  std::vector<Period> ps;
  std::vector<double> a, b;
  for (int t = 0; t < T; ++t) {
    ps.push_back(period_from_atoms(random_atoms(rng, n, k, riskless ? ur(rng) : 0.0), n));
    a.push_back(ua(rng));
    b.push_back(ub(rng));
  }
  const double x0 = ux(rng);
  return separable(n, x0, ps, a, b);
}

// Moments of a well-conditioned random instance with n entities.
inline PeriodMoments random_moments(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> um(-0.05, 0.2);
  MatrixXd L(n + 1, n + 1);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) L(i, j) = g(rng);
  VectorXd mean(n + 1);
  mean[0] = 1.0 + 0.05 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (int i = 1; i <= n; ++i) mean[i] = um(rng);
  // second moments of (e, P): covariance L L' / (n+1) + 0.05 I plus mean outer product
  const MatrixXd cov = L * L.transpose() / (n + 1) + 0.05 * MatrixXd::Identity(n + 1, n + 1);
  const MatrixXd raw = cov + mean * mean.transpose();
  PeriodMoments m;
  m.mean_ref = mean[0];
  m.second_ref = raw(0, 0);
  m.mean_excess = mean.tail(n);
  m.cross = raw.block(1, 0, n, 1);
  m.second_excess = raw.block(1, 1, n, n);
  return m;
}

}  // namespace resalloc::testing

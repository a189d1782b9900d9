#include "simulate.hpp"

#include "errors.hpp"
#include "numfmt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

namespace resalloc {
namespace {

constexpr double kZ95 = 1.959963984540054;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
  std::uint64_t state = seed;
  state = splitmix64(state) ^ (path * 0xd1b54a32d192ed03ULL);
  return std::mt19937_64(splitmix64(state));
}

struct SampledPeriod {
  std::vector<double> cum;
  std::vector<double> e;
  std::vector<VectorXd> P;
};

std::vector<SampledPeriod> sampled_periods(const ProblemSpec& problem) {
  std::vector<SampledPeriod> out;
  const int n = problem.n();
  for (int t = 0; t < problem.horizon; ++t) {
    const Period& period = problem.period(t);
    if (!period.has_atoms()) fail(ErrorCode::MissingAtoms, fmt::format("period {} has no atoms", t + 1));
    SampledPeriod sp;
    double c = 0.0;
    for (const auto& atom : period.atoms) {
      c += atom.prob;
      sp.cum.push_back(c);
      sp.e.push_back(atom.returns[0]);
      sp.P.push_back(atom.returns.tail(n).array() - atom.returns[0]);
    }
    out.push_back(std::move(sp));
  }
  return out;
}

int pick(const std::vector<double>& cum, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
}

// Fixed summation tree, so the result does not depend on thread layout.
double pairwise_sum(const double* p, size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(p, h) + pairwise_sum(p + h, n - h);
}

double pairwise_mean(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size()); }

template <class F>
void parallel_for(std::uint64_t count, int threads, const F& body) {
  unsigned hw = std::thread::hardware_concurrency();
  std::uint64_t k = threads > 0 ? static_cast<std::uint64_t>(threads) : std::max(1u, hw);
  k = std::min<std::uint64_t>(k, std::max<std::uint64_t>(1, count / 1024));
  if (k <= 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    const std::uint64_t lo = count * i / k;
    const std::uint64_t hi = count * (i + 1) / k;
    pool.emplace_back([&, i, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Interval ci(double center, double se) { return {center - kZ95 * se, center + kZ95 * se}; }

}  // namespace

std::vector<int> draw_path(const ProblemSpec& problem, std::uint64_t seed, std::uint64_t path) {
  const auto periods = sampled_periods(problem);
  auto rng = path_engine(seed, path);
  std::vector<int> out;
  for (const auto& sp : periods) out.push_back(pick(sp.cum, rng));
  return out;
}

SimSummary simulate_policy(const ProblemSpec& problem, const PolicyFn& policy, const SimOptions& options) {
  check_problem(problem);
  if (options.paths < 1) fail(ErrorCode::InvalidArgument, "paths must be at least 1");
  const auto periods = sampled_periods(problem);
  const size_t T = static_cast<size_t>(problem.horizon);
  const std::uint64_t N = options.paths;
  const int n = problem.n();

  // Column-major by period: xs[t][path].
  std::vector<std::vector<double>> xs(T, std::vector<double>(N));
  std::vector<std::vector<double>> od(T, std::vector<double>(N));
  parallel_for(N, options.threads, [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t p = lo; p < hi; ++p) {
      auto rng = path_engine(options.seed, p);
      double x = problem.x0;
      for (size_t t = 0; t < T; ++t) {
        const SampledPeriod& sp = periods[t];
        const int j = pick(sp.cum, rng);
        const VectorXd u = policy(static_cast<int>(t), x);
        if (u.size() != n) fail(ErrorCode::InvalidArgument, "policy returned an allocation of the wrong size");
        od[t][p] = std::max(0.0, u.sum() - x);
        x = sp.e[static_cast<size_t>(j)] * x + sp.P[static_cast<size_t>(j)].dot(u);
        xs[t][p] = x;
      }
    }
  });

  SimSummary out;
  out.paths = N;
  out.seed = options.seed;
  const double dn = static_cast<double>(N);
  std::vector<double> means(T), seconds(T), overdraft(T);
  std::vector<double> scratch(N);
  for (size_t t = 0; t < T; ++t) {
    PeriodEstimate pe;
    pe.mean = pairwise_mean(xs[t]);
    for (std::uint64_t p = 0; p < N; ++p) scratch[p] = (xs[t][p] - pe.mean) * (xs[t][p] - pe.mean);
    const double m2 = pairwise_mean(scratch);
    for (std::uint64_t p = 0; p < N; ++p) scratch[p] *= scratch[p];
    const double m4 = pairwise_mean(scratch);
    pe.var = N > 1 ? m2 * dn / (dn - 1.0) : 0.0;
    pe.se_mean = std::sqrt(pe.var / dn);
    // finite-sample variance of the unbiased sample variance
    pe.se_var = N > 3 ? std::sqrt(std::max(0.0, m4 / dn - pe.var * pe.var * (dn - 3.0) / (dn * (dn - 1.0)))) : 0.0;
    pe.mean_ci = ci(pe.mean, pe.se_mean);
    pe.var_ci = ci(pe.var, pe.se_var);
    pe.overdraft = pairwise_mean(od[t]);
    means[t] = pe.mean;
    seconds[t] = pe.mean * pe.mean + pe.var;
    overdraft[t] = pe.overdraft;
    out.periods.push_back(pe);
  }
  out.objective = objective_value(problem, means, seconds, overdraft);

  // Standard error from the per-path influence of the objective.
  const auto& obj = problem.objective;
  std::vector<double> phi(N, 0.0);
  for (size_t t = 0; t < T; ++t) {
    const double c = problem.borrow_cost ? (*problem.borrow_cost)[t] : 0.0;
    for (std::uint64_t p = 0; p < N; ++p) {
      const double x = xs[t][p];
      double v = 0.0;
      switch (obj.form) {
        case ObjectiveForm::Separable: v = obj.a[t] * x - obj.b[t] * x * x; break;
        case ObjectiveForm::Lagrangian: v = obj.w[t] * x - obj.y[t] * (x - means[t]) * (x - means[t]); break;
        case ObjectiveForm::VarianceConstrained: v = obj.w[t] * x; break;
      }
      phi[p] += v - c * od[t][p];
    }
  }
  const double phi_mean = pairwise_mean(phi);
  for (auto& v : phi) v = (v - phi_mean) * (v - phi_mean);
  const double phi_var = N > 1 ? pairwise_mean(phi) * dn / (dn - 1.0) : 0.0;
  out.objective_se = std::sqrt(phi_var / dn);
  out.objective_ci = ci(out.objective, out.objective_se);
  return out;
}

SimSummary simulate_policy(const ProblemSpec& problem, const Policy& policy, const SimOptions& options) {
  if (policy.size() != static_cast<size_t>(problem.horizon)) {
    fail(ErrorCode::InvalidArgument, "policy must have one rule per period");
  }
  return simulate_policy(problem, policy_fn(policy), options);
}

MomentTrajectory propagate_moments(const ProblemSpec& problem, const Policy& policy) {
  check_problem(problem);
  const size_t T = static_cast<size_t>(problem.horizon);
  if (policy.size() != T) fail(ErrorCode::InvalidArgument, "policy must have one rule per period");
  const int n = problem.n();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  MomentTrajectory out;
  double m = problem.x0;
  double s = problem.x0 * problem.x0;
  Interval reach{problem.x0, problem.x0};
  for (size_t t = 0; t < T; ++t) {
    const StageRule& rule = policy[t];
    const Period& period = problem.period(static_cast<int>(t));
    if (rule.n() != n) fail(ErrorCode::InvalidArgument, fmt::format("period {} rule has the wrong size", t + 1));

    size_t k = 0;
    if (std::isfinite(reach.lo) && std::isfinite(reach.hi)) k = rule.law_index(0.5 * (reach.lo + reach.hi));
    else if (std::isfinite(reach.lo)) k = rule.law_index(reach.lo);
    else if (std::isfinite(reach.hi)) k = rule.law_index(reach.hi);
    const auto [lo_k, hi_k] = rule.interval(k);
    if (reach.lo < lo_k || reach.hi > hi_k) {
      fail(ErrorCode::RegimeCrossing,
           fmt::format("period {}: reachable [{}, {}] crosses a policy breakpoint", t + 1, reach.lo, reach.hi));
    }
    const AffineLaw& law = rule.laws()[k];
    const VectorXd& g = law.offset;
    const VectorXd& h = law.slope;

    // (1'u - x)^+ must keep one sign over the reachable interval.
    const double og = g.sum();
    const double oh = h.sum() - 1.0;
    auto gap = [&](double x) { return og + oh * x; };
    double e_od = 0.0;
    const double glo = std::isfinite(reach.lo) ? gap(reach.lo) : (oh == 0.0 ? og : (oh > 0.0 ? -kInf : kInf));
    const double ghi = std::isfinite(reach.hi) ? gap(reach.hi) : (oh == 0.0 ? og : (oh > 0.0 ? kInf : -kInf));
    if (glo > 0.0 || ghi > 0.0) {
      if (glo < 0.0 || ghi < 0.0) {
        if (problem.borrow_cost) {
          fail(ErrorCode::RegimeCrossing, fmt::format("period {}: overdraft changes sign on the reachable range", t + 1));
        }
        e_od = std::numeric_limits<double>::quiet_NaN();
      } else {
        e_od = og + oh * m;
      }
    }

    const PeriodMoments& pm = period.moments;
    const double Ea = pm.mean_ref + pm.mean_excess.dot(h);
    const double Eb = pm.mean_excess.dot(g);
    const double Eaa = pm.second_ref + 2.0 * pm.cross.dot(h) + h.dot(pm.second_excess * h);
    const double Eab = pm.cross.dot(g) + h.dot(pm.second_excess * g);
    const double Ebb = g.dot(pm.second_excess * g);
    const double m_next = Ea * m + Eb;
    const double s_next = Eaa * s + 2.0 * Eab * m + Ebb;

    if (period.has_atoms() && std::isfinite(reach.lo) && std::isfinite(reach.hi)) {
      Interval next{kInf, -kInf};
      for (const auto& atom : period.atoms) {
        const double e = atom.returns[0];
        const VectorXd P = atom.returns.tail(n).array() - e;
        for (double x : {reach.lo, reach.hi}) {
          const double v = (e + P.dot(h)) * x + P.dot(g);
          next.lo = std::min(next.lo, v);
          next.hi = std::max(next.hi, v);
        }
      }
      reach = next;
    } else {
      reach = {-kInf, kInf};
    }

    m = m_next;
    s = s_next;
    out.means.push_back(m);
    out.seconds.push_back(s);
    out.variances.push_back(std::max(0.0, s - m * m));
    out.overdraft.push_back(e_od);
  }
  out.objective = objective_value(problem, out.means, out.seconds, out.overdraft);
  return out;
}

nlohmann::json sim_summary_to_json(const SimSummary& s) {
  nlohmann::json j;
  j["paths"] = std::to_string(s.paths);
  j["seed"] = std::to_string(s.seed);
  j["objective"] = json_number(s.objective);
  j["objective_se"] = json_number(s.objective_se);
  j["objective_ci"] = {json_number(s.objective_ci.lo), json_number(s.objective_ci.hi)};
  nlohmann::json periods = nlohmann::json::array();
  for (size_t t = 0; t < s.periods.size(); ++t) {
    const auto& p = s.periods[t];
    periods.push_back({{"period", t + 1},
                       {"mean", json_number(p.mean)},
                       {"var", json_number(p.var)},
                       {"se_mean", json_number(p.se_mean)},
                       {"se_var", json_number(p.se_var)},
                       {"mean_ci", {json_number(p.mean_ci.lo), json_number(p.mean_ci.hi)}},
                       {"var_ci", {json_number(p.var_ci.lo), json_number(p.var_ci.hi)}},
                       {"overdraft", json_number(p.overdraft)}});
  }
  j["periods"] = std::move(periods);
  return j;
}

std::string sim_summary_to_csv(const SimSummary& s) {
  std::string out = "period,mean,var,se_mean,se_var\n";
  for (size_t t = 0; t < s.periods.size(); ++t) {
    const auto& p = s.periods[t];
    out += fmt::format("{},{},{},{},{}\n", t + 1, format_number(p.mean), format_number(p.var),
                       format_number(p.se_mean), format_number(p.se_var));
  }
  return out;
}

}  // namespace resalloc

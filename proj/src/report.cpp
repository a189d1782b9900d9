#include "report.hpp"

#include "dpnd.hpp"
#include "numfmt.hpp"

#include <fmt/format.h>

#include <cmath>

namespace resalloc {
namespace {

using nlohmann::json;

json numbers_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

json coefficients_json(const StageCoefficients& c) {
  return {{"a_hat", json_number(c.a_hat)}, {"b_hat", json_number(c.b_hat)}, {"gamma_hat", json_number(c.gamma_hat)},
          {"regime", c.regime},          {"a", json_number(c.a)},         {"b", json_number(c.b)}};
}

json trace_json(const std::vector<TraceRow>& trace) {
  json out = json::array();
  for (const auto& row : trace) {
    out.push_back({{"iteration", row.iteration},
                   {"params", numbers_json(row.params)},
                   {"variances", numbers_json(row.variances)},
                   {"residuals", numbers_json(row.residuals)}});
  }
  return out;
}

}  // namespace

json solve_report_to_json(const ProblemSpec& problem, const SolveReport& r) {
  json j;
  j["method"] = r.method;
  j["objective_form"] = std::string(objective_form_name(problem.objective.form));
  j["horizon"] = problem.horizon;
  j["n"] = problem.n();
  j["x0"] = json_number(problem.x0);
  j["objective"] = json_number(r.objective);
  j["separable_value"] = json_number(r.separable_value);
  j["moments_method"] = r.moments_method;
  j["a"] = numbers_json(r.a);
  j["b"] = numbers_json(r.b);
  if (!r.y.empty()) j["y"] = numbers_json(r.y);

  json periods = json::array();
  for (size_t t = 0; t < r.policy.size(); ++t) {
    json p;
    p["period"] = t + 1;
    p["mean"] = json_number(r.means[t]);
    p["var"] = json_number(r.variances[t]);
    p["overdraft"] = json_number(r.overdraft[t]);
    p["regime_boundaries"] = numbers_json(r.policy[t].breakpoints());
    p["value"] = r.values[t].to_json();
    if (t < r.coefficients.size()) {
      json cs = json::array();
      for (const auto& c : r.coefficients[t]) cs.push_back(coefficients_json(c));
      p["coefficients"] = cs;
    }
    if (t < r.thresholds.size()) p["threshold"] = json_number(r.thresholds[t]);
    periods.push_back(p);
  }
  j["periods"] = periods;
  j["policy"] = policy_to_json(r.policy);

  if (r.pi3) {
    j["calibration"] = {{"kind", "pi2_to_pi3"},
                        {"iterations", r.pi3->iterations},
                        {"residual", json_number(r.pi3->residual)},
                        {"lagrangian", json_number(r.pi3->objective)},
                        {"trace", trace_json(r.pi3->trace)}};
  }
  if (r.pi1) {
    j["calibration"] = {{"kind", "pi1_to_pi2"},
                        {"iterations", r.pi1->iterations},
                        {"violation", numbers_json(r.pi1->violation)},
                        {"primal", json_number(r.pi1->primal)},
                        {"dual", json_number(r.pi1->dual)},
                        {"duality_gap", json_number(r.pi1->gap)},
                        {"trace", trace_json(r.pi1->trace)}};
  }
  return j;
}

std::string validation_text(const std::vector<ValidationReport>& reports) {
  std::string out;
  const ValidationCheck* first_fail = nullptr;
  for (size_t t = 0; t < reports.size(); ++t) {
    for (const auto& c : reports[t].checks) {
      out += fmt::format("period {} {}: {} ({})\n", t + 1, c.name, c.pass ? "pass" : "FAIL", c.detail);
      if (!c.pass && !first_fail) first_fail = &c;
    }
  }
  out += first_fail ? fmt::format("assumption1: fail ({})\n", first_fail->name) : std::string("assumption1: pass\n");
  return out;
}

json validation_json(const std::vector<ValidationReport>& reports) {
  json periods = json::array();
  bool pass = true;
  for (size_t t = 0; t < reports.size(); ++t) {
    json checks = json::array();
    for (const auto& c : reports[t].checks) {
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", json_number(c.value)}, {"detail", c.detail}});
      pass = pass && c.pass;
    }
    periods.push_back({{"period", t + 1}, {"checks", checks}});
  }
  return {{"assumption1", pass ? "pass" : "fail"}, {"periods", periods}};
}

std::string compare_text(const std::vector<CompareRow>& rows) {
  std::string out = fmt::format("{:>6} {:>14} {:>14} {:>14}  {}\n", "period", "x", "enforced 1'u", "uncapped 1'u",
                                "uncapped status");
  for (const auto& r : rows) {
    out += fmt::format("{:>6} {:>14.6f} {:>14.6f} {:>14.6f}  {}\n", r.period, r.x, r.constrained_sum, r.free_sum,
                       r.free_infeasible ? "INFEASIBLE" : "ok");
  }
  return out;
}

json compare_json(const std::vector<CompareRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json c = json::array();
    json f = json::array();
    for (Eigen::Index i = 0; i < r.constrained.size(); ++i) c.push_back(json_number(r.constrained[i]));
    for (Eigen::Index i = 0; i < r.free.size(); ++i) f.push_back(json_number(r.free[i]));
    out.push_back({{"period", r.period},
                   {"x", json_number(r.x)},
                   {"enforced", c},
                   {"enforced_sum", json_number(r.constrained_sum)},
                   {"uncapped", f},
                   {"uncapped_sum", json_number(r.free_sum)},
                   {"uncapped_status", r.free_infeasible ? "INFEASIBLE" : "ok"}});
  }
  return out;
}

}  // namespace resalloc

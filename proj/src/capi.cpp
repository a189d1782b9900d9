#include "resalloc/resalloc.h"

#include "calibrate.hpp"
#include "errors.hpp"
#include "numfmt.hpp"
#include "oracle.hpp"
#include "problem_json.hpp"
#include "report.hpp"
#include "simulate.hpp"
#include "solve.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

using namespace resalloc;
using nlohmann::json;

struct ra_problem {
  ProblemSpec spec;
};

struct ra_result {
  ProblemSpec problem;
  SolveReport report;
};

namespace {

thread_local std::string g_last_error;

template <class F>
ra_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<ra_status>(static_cast<int>(e.code()) + 1);
  } catch (const json::exception& e) {
    g_last_error = std::string("SchemaError: ") + e.what();
    return RA_SCHEMA_ERROR;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return RA_INTERNAL_ERROR;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** dst, const std::string& s) {
  if (dst) *dst = dup(s);
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

SolveOptions solve_options(const ra_solve_options* o) {
  SolveOptions out;
  if (!o) return out;
  out.paper_literal = o->paper_literal != 0;
  out.scenario_exact = o->scenario_exact != 0;
  out.nonneg = o->nonneg != 0;
  out.pi3.damping = o->damping;
  out.pi1.inner.damping = o->damping;
  return out;
}

json numbers_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

}  // namespace

extern "C" {

RA_API const char* ra_version(void) { return "1.0.0"; }

RA_API const char* ra_status_name(ra_status status) {
  if (status == RA_OK) return "OK";
  if (status == RA_INTERNAL_ERROR) return "InternalError";
  if (status > RA_OK && status < RA_INTERNAL_ERROR) {
    return error_name(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
  }
  return "Unknown";
}

RA_API const char* ra_last_error(void) { return g_last_error.c_str(); }

RA_API void ra_string_free(char* s) { std::free(s); }

RA_API void ra_solve_options_default(ra_solve_options* opts) {
  if (!opts) return;
  opts->paper_literal = 0;
  opts->scenario_exact = 0;
  opts->nonneg = 0;
  opts->damping = 1.0;
}

RA_API void ra_sim_options_default(ra_sim_options* opts) {
  if (!opts) return;
  opts->paths = 100000;
  opts->seed = 42;
  opts->threads = 0;
}

RA_API void ra_oracle_options_default(ra_oracle_options* opts) {
  if (!opts) return;
  opts->grid = 201;
  opts->line = 0;
  opts->nonneg = 0;
}

RA_API ra_status ra_problem_from_json(const char* text, ra_problem** out) {
  return guarded([&] {
    need(text, "json");
    need(out, "out");
    *out = nullptr;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what());
    }
    *out = new ra_problem{problem_from_json(j)};
  });
}

RA_API ra_status ra_problem_load(const char* path, ra_problem** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new ra_problem{load_problem(path)};
  });
}

RA_API void ra_problem_free(ra_problem* problem) { delete problem; }

RA_API int ra_problem_horizon(const ra_problem* problem) { return problem ? problem->spec.horizon : 0; }

RA_API int ra_problem_n(const ra_problem* problem) { return problem ? problem->spec.n() : 0; }

RA_API ra_status ra_validate(const ra_problem* problem, int* pass, char** text, char** json_out) {
  return guarded([&] {
    need(problem, "problem");
    const auto reports = validate_problem(problem->spec);
    bool ok = true;
    for (const auto& r : reports) ok = ok && r.pass();
    if (pass) *pass = ok ? 1 : 0;
    put(text, validation_text(reports));
    put(json_out, validation_json(reports).dump(2));
  });
}

RA_API ra_status ra_solve(const ra_problem* problem, const ra_solve_options* opts, ra_result** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = nullptr;
    *out = new ra_result{problem->spec, solve(problem->spec, solve_options(opts))};
  });
}

RA_API void ra_result_free(ra_result* result) { delete result; }

RA_API double ra_result_objective(const ra_result* result) {
  return result ? result->report.objective : std::nan("");
}

RA_API ra_status ra_result_json(const ra_result* result, char** json_out) {
  return guarded([&] {
    need(result, "result");
    need(json_out, "json");
    *json_out = dup(solve_report_to_json(result->problem, result->report).dump(2));
  });
}

RA_API ra_status ra_result_allocation(const ra_result* result, int t, double x, double* u, int n) {
  return guarded([&] {
    need(result, "result");
    need(u, "u");
    const auto& policy = result->report.policy;
    if (t < 1 || t > static_cast<int>(policy.size())) fail(ErrorCode::InvalidArgument, "period out of range");
    if (n != result->problem.n()) fail(ErrorCode::InvalidArgument, "allocation buffer has the wrong size");
    const VectorXd v = policy[static_cast<size_t>(t - 1)](x);
    for (int i = 0; i < n; ++i) u[i] = v[i];
  });
}

RA_API ra_status ra_simulate(const ra_problem* problem, const char* policy_json, const ra_sim_options* opts,
                             char** json_out, char** csv) {
  return guarded([&] {
    need(problem, "problem");
    need(policy_json, "policy_json");
    json j;
    try {
      j = json::parse(policy_json);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::SchemaError, std::string("invalid policy JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("policy")) j = j.at("policy");
    const Policy policy = policy_from_json(j);
    SimOptions so;
    if (opts) {
      so.paths = opts->paths;
      so.seed = opts->seed;
      so.threads = opts->threads;
    }
    const SimSummary s = simulate_policy(problem->spec, policy, so);
    put(json_out, sim_summary_to_json(s).dump(2));
    put(csv, sim_summary_to_csv(s));
  });
}

RA_API ra_status ra_calibrate(const ra_problem* problem, const ra_solve_options* opts, char** json_out,
                              char** trace_csv) {
  return guarded([&] {
    need(problem, "problem");
    const ProblemSpec& p = problem->spec;
    const SolveOptions so = solve_options(opts);
    const SeparableSolver solver = make_solver(so);
    json j;
    if (p.objective.form == ObjectiveForm::VarianceConstrained) {
      const Pi1Result r = pi1_to_pi2(p, solver, so.pi1);
      j = {{"kind", "pi1_to_pi2"},
           {"y", numbers_json(r.y)},
           {"a", numbers_json(r.pi2.a)},
           {"b", numbers_json(r.pi2.b)},
           {"iterations", r.iterations},
           {"variances", numbers_json(r.pi2.solution.variances)},
           {"violation", numbers_json(r.violation)},
           {"primal", json_number(r.primal)},
           {"dual", json_number(r.dual)},
           {"duality_gap", json_number(r.gap)}};
      put(trace_csv, trace_to_csv(r.trace, "y"));
    } else if (p.objective.form == ObjectiveForm::Lagrangian) {
      const Pi3Result r = pi2_to_pi3(p, solver, so.pi3);
      j = {{"kind", "pi2_to_pi3"},
           {"a", numbers_json(r.a)},
           {"b", numbers_json(r.b)},
           {"iterations", r.iterations},
           {"residual", json_number(r.residual)},
           {"means", numbers_json(r.solution.means)},
           {"variances", numbers_json(r.solution.variances)},
           {"lagrangian", json_number(r.objective)}};
      put(trace_csv, trace_to_csv(r.trace, "a"));
    } else {
      fail(ErrorCode::InvalidArgument, "calibration needs a VarianceConstrained or Lagrangian objective");
    }
    put(json_out, j.dump(2));
  });
}

RA_API ra_status ra_calibrate_chance(const ra_problem* problem, const double* w, const double* d, int T,
                                     const ra_solve_options* opts, char** json_out, char** trace_csv) {
  return guarded([&] {
    need(problem, "problem");
    need(w, "w");
    need(d, "d");
    if (T != problem->spec.horizon) fail(ErrorCode::InvalidArgument, "chance vectors must have T entries");
    const ChanceSpec spec{std::vector<double>(w, w + T), std::vector<double>(d, d + T)};
    const SolveOptions so = solve_options(opts);
    ChanceOptions co;
    co.inner = so.pi3;
    const ChanceResult r = chance_to_meanvar(problem->spec, spec, make_solver(so), co);
    const json j = {{"kind", "chance_to_meanvar"},
                    {"w", numbers_json(r.w)},
                    {"y", numbers_json(r.y)},
                    {"rounds", r.rounds},
                    {"skipped", r.skipped},
                    {"means_initial", numbers_json(r.means_initial)},
                    {"means", numbers_json(r.pi2.solution.means)},
                    {"variances", numbers_json(r.pi2.solution.variances)},
                    {"bound", numbers_json(r.bound)}};
    put(json_out, j.dump(2));
    put(trace_csv, trace_to_csv(r.trace, "y"));
  });
}

RA_API ra_status ra_compare(const ra_problem* problem, const ra_solve_options* opts, char** text, char** json_out) {
  return guarded([&] {
    need(problem, "problem");
    const auto rows = compare_budget(problem->spec, solve_options(opts));
    put(text, compare_text(rows));
    put(json_out, compare_json(rows).dump(2));
  });
}

RA_API ra_status ra_oracle(const ra_problem* problem, const ra_oracle_options* opts, char** json_out) {
  return guarded([&] {
    need(problem, "problem");
    OracleOptions oo;
    if (opts) {
      oo.grid = opts->grid;
      oo.search = opts->line ? OracleSearch::Line : OracleSearch::Grid;
      oo.nonneg = opts->nonneg != 0;
    }
    const OracleResult r = oracle_solve(problem->spec, oo);
    json nodes = json::array();
    for (const auto& node : r.policy.nodes) {
      nodes.push_back({{"history", node.history}, {"x", json_number(node.x)}, {"u", vector_json(node.u)}});
    }
    const json j = {{"objective", json_number(r.objective)},
                    {"search", oo.search == OracleSearch::Line ? "line" : "grid"},
                    {"grid", oo.grid},
                    {"means", numbers_json(r.evaluation.means)},
                    {"variances", numbers_json(r.evaluation.variances)},
                    {"evaluated_objective", json_number(r.evaluation.objective)},
                    {"nodes", nodes}};
    put(json_out, j.dump(2));
  });
}

}  // extern "C"

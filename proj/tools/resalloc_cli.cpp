#include "resalloc/resalloc.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitSolver = 3;

struct RunConfig {
  std::string input;
  std::string output;
  std::string mode = "exact";
  bool scenario_exact = false;
  bool nonneg = false;
  std::uint64_t paths = 100000;
  std::uint64_t seed = 42;
  int threads = 0;
  int grid = 201;
  bool line = false;
  double damping = 1.0;
  std::string policy;
  std::string trace;
  std::vector<double> targets;
};

struct StringDeleter {
  void operator()(char* s) const { ra_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ProblemDeleter {
  void operator()(ra_problem* p) const { ra_problem_free(p); }
};
struct ResultDeleter {
  void operator()(ra_result* r) const { ra_result_free(r); }
};

bool is_input_error(ra_status s) {
  return s == RA_SCHEMA_ERROR || s == RA_EMPTY_ATOM_LIST || s == RA_PROBABILITY_NOT_NORMALIZED;
}

int report_error(ra_status s) {
  std::cerr << "error [" << ra_status_name(s) << "]: " << ra_last_error() << "\n";
  return is_input_error(s) ? kExitInvalid : kExitSolver;
}

bool write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return false;
  }
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
  return true;
}

bool read_text(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::stringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ra_solve_options solve_options(const RunConfig& cfg) {
  ra_solve_options o;
  ra_solve_options_default(&o);
  o.paper_literal = cfg.mode == "paper-literal" ? 1 : 0;
  o.scenario_exact = cfg.scenario_exact ? 1 : 0;
  o.nonneg = cfg.nonneg ? 1 : 0;
  o.damping = cfg.damping;
  return o;
}

int run(const std::string& command, const RunConfig& cfg) {
  ra_problem* raw = nullptr;
  ra_status s = ra_problem_load(cfg.input.c_str(), &raw);
  if (s != RA_OK) return report_error(s);
  std::unique_ptr<ra_problem, ProblemDeleter> problem(raw);
  const ra_solve_options so = solve_options(cfg);

  if (command == "validate") {
    int pass = 0;
    char* text = nullptr;
    char* json = nullptr;
    s = ra_validate(problem.get(), &pass, &text, &json);
    if (s != RA_OK) return report_error(s);
    OwnedString t(text), j(json);
    std::cout << text;
    if (!cfg.output.empty() && !write_text(cfg.output, json)) return kExitSolver;
    return pass ? kExitOk : kExitInvalid;
  }

  if (command == "solve") {
    ra_result* rr = nullptr;
    s = ra_solve(problem.get(), &so, &rr);
    if (s != RA_OK) return report_error(s);
    std::unique_ptr<ra_result, ResultDeleter> result(rr);
    char* json = nullptr;
    s = ra_result_json(result.get(), &json);
    if (s != RA_OK) return report_error(s);
    OwnedString j(json);
    return write_text(cfg.output, json) ? kExitOk : kExitSolver;
  }

  if (command == "simulate") {
    std::string policy;
    if (!cfg.policy.empty()) {
      if (!read_text(cfg.policy, policy)) {
        std::cerr << "error [SchemaError]: cannot open '" << cfg.policy << "'\n";
        return kExitInvalid;
      }
    } else {
      ra_result* rr = nullptr;
      s = ra_solve(problem.get(), &so, &rr);
      if (s != RA_OK) return report_error(s);
      std::unique_ptr<ra_result, ResultDeleter> result(rr);
      char* json = nullptr;
      s = ra_result_json(result.get(), &json);
      if (s != RA_OK) return report_error(s);
      OwnedString j(json);
      policy = json;
    }
    ra_sim_options sim;
    ra_sim_options_default(&sim);
    sim.paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.threads = cfg.threads;
    char* json = nullptr;
    char* csv = nullptr;
    s = ra_simulate(problem.get(), policy.c_str(), &sim, &json, &csv);
    if (s != RA_OK) return report_error(s);
    OwnedString j(json), c(csv);
    return write_text(cfg.output, ends_with(cfg.output, ".csv") ? csv : json) ? kExitOk : kExitSolver;
  }

  if (command == "calibrate") {
    char* json = nullptr;
    char* trace = nullptr;
    if (!cfg.targets.empty()) {
      std::vector<double> w(cfg.targets.size(), 1.0);
      s = ra_calibrate_chance(problem.get(), w.data(), cfg.targets.data(), static_cast<int>(cfg.targets.size()), &so,
                              &json, &trace);
    } else {
      s = ra_calibrate(problem.get(), &so, &json, &trace);
    }
    if (s != RA_OK) return report_error(s);
    OwnedString j(json), t(trace);
    if (!cfg.trace.empty() && !write_text(cfg.trace, trace)) return kExitSolver;
    return write_text(cfg.output, json) ? kExitOk : kExitSolver;
  }

  if (command == "compare") {
    char* text = nullptr;
    char* json = nullptr;
    s = ra_compare(problem.get(), &so, &text, &json);
    if (s != RA_OK) return report_error(s);
    OwnedString t(text), j(json);
    std::cout << text;
    if (!cfg.output.empty() && !write_text(cfg.output, json)) return kExitSolver;
    return kExitOk;
  }

  if (command == "oracle") {
    ra_oracle_options oo;
    ra_oracle_options_default(&oo);
    oo.grid = cfg.grid;
    oo.line = cfg.line ? 1 : 0;
    oo.nonneg = cfg.nonneg ? 1 : 0;
    char* json = nullptr;
    s = ra_oracle(problem.get(), &oo, &json);
    if (s != RA_OK) return report_error(s);
    OwnedString j(json);
    return write_text(cfg.output, json) ? kExitOk : kExitSolver;
  }
  return kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-period mean-variance resource allocation solver"};
  app.set_version_flag("--version", std::string(ra_version()));
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-i,--input", cfg.input, "problem JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", cfg.output, "output path (stdout when omitted)");
  };
  auto modes = [&](CLI::App* sub) {
    sub->add_option("--mode", cfg.mode, "closed-form variant")->check(CLI::IsMember({"exact", "paper-literal"}));
    sub->add_flag("--scenario-exact", cfg.scenario_exact, "expectations over scenario atoms");
    sub->add_flag("--nonneg", cfg.nonneg, "forbid negative allocations");
    sub->add_option("--damping", cfg.damping, "fixed-point damping in (0, 1]")->check(CLI::Range(1e-6, 1.0));
  };

  auto* validate = app.add_subcommand("validate", "check moment conditions");
  common(validate);
  auto* solve = app.add_subcommand("solve", "backward induction; policy and value report");
  common(solve);
  modes(solve);
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
  common(simulate);
  modes(simulate);
  simulate->add_option("--policy", cfg.policy, "solve output to evaluate (solves first when omitted)");
  simulate->add_option("--paths", cfg.paths, "path count")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", cfg.seed, "RNG seed");
  simulate->add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  auto* calibrate = app.add_subcommand("calibrate", "multipliers y or separable weights (a, b)");
  common(calibrate);
  modes(calibrate);
  calibrate->add_option("--trace", cfg.trace, "calibration trace CSV");
  calibrate->add_option("--targets", cfg.targets, "chance targets d_t (unit weights)")->delimiter(',');
  auto* compare = app.add_subcommand("compare", "budget-enforced against uncapped allocations");
  common(compare);
  modes(compare);
  auto* oracle = app.add_subcommand("oracle", "scenario-tree search");
  common(oracle);
  oracle->add_option("--grid", cfg.grid, "grid points per entity")->check(CLI::Range(2, 2001));
  oracle->add_flag("--line", cfg.line, "line search with exact last-period leaves");
  oracle->add_flag("--nonneg", cfg.nonneg, "forbid negative allocations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }
  return run(app.get_subcommands().front()->get_name(), cfg);
}

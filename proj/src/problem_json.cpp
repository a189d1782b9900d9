#include "problem_json.hpp"

#include "errors.hpp"
#include "numfmt.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace resalloc {
namespace {

using nlohmann::json;

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::SchemaError, where + " must be an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::SchemaError, fmt::format("{} is missing '{}'", where, key));
  return *it;
}

double number(const json& j, const std::string& where) {
  double v = 0.0;
  try {
    v = parse_number(j);
  } catch (const Error&) {
    fail(ErrorCode::SchemaError, where + " must be a number");
  }
  if (!std::isfinite(v)) fail(ErrorCode::SchemaError, where + " must be finite");
  return v;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::SchemaError, where + " must be an array");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], fmt::format("{}[{}]", where, i)));
  return out;
}

VectorXd vector_of(const json& j, const std::string& where) {
  const auto v = numbers(j, where);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

int integer(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) fail(ErrorCode::SchemaError, where + " must be an integer");
  return static_cast<int>(v);
}

ObjectiveForm form_of(const json& j) {
  if (!j.is_string()) fail(ErrorCode::SchemaError, "objective.form must be a string");
  const std::string s = j.get<std::string>();
  for (auto f : {ObjectiveForm::VarianceConstrained, ObjectiveForm::Lagrangian, ObjectiveForm::Separable}) {
    if (s == objective_form_name(f)) return f;
  }
  fail(ErrorCode::SchemaError, "unknown objective.form '" + s + "'");
}

PeriodMoments moments_of(const json& j, int n, const std::string& where) {
  PeriodMoments m;
  m.mean_ref = number(field(j, "mean_ref", where), where + ".mean_ref");
  m.second_ref = number(field(j, "second_ref", where), where + ".second_ref");
  m.mean_excess = vector_of(field(j, "mean_excess", where), where + ".mean_excess");
  m.cross = vector_of(field(j, "cross", where), where + ".cross");
  const json& rows = field(j, "second_excess", where);
  if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
    fail(ErrorCode::SchemaError, fmt::format("{}.second_excess must have {} rows", where, n));
  }
  m.second_excess.resize(n, n);
  for (int r = 0; r < n; ++r) {
    const VectorXd row = vector_of(rows[static_cast<size_t>(r)], fmt::format("{}.second_excess[{}]", where, r));
    if (row.size() != n) fail(ErrorCode::SchemaError, fmt::format("{}.second_excess rows must have {} entries", where, n));
    m.second_excess.row(r) = row.transpose();
  }
  if (m.mean_excess.size() != n || m.cross.size() != n) {
    fail(ErrorCode::SchemaError, fmt::format("{} vectors must have {} entries", where, n));
  }
  return m;
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

ProblemSpec problem_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::SchemaError, "problem must be a JSON object");
  ProblemSpec p;
  p.horizon = integer(field(j, "horizon", "problem"), "horizon");
  p.x0 = number(field(j, "x0", "problem"), "x0");
  p.model.n = integer(field(j, "n", "problem"), "n");
  if (p.horizon < 1) fail(ErrorCode::SchemaError, "horizon must be at least 1");
  if (p.model.n < 1) fail(ErrorCode::SchemaError, "n must be at least 1");
  const int n = p.model.n;

  const json& obj = field(j, "objective", "problem");
  p.objective.form = form_of(field(obj, "form", "objective"));
  auto opt = [&](const char* key, std::vector<double>& dst) {
    if (obj.contains(key)) dst = numbers(obj.at(key), std::string("objective.") + key);
  };
  opt("w", p.objective.w);
  opt("alpha", p.objective.alpha);
  opt("y", p.objective.y);
  opt("a", p.objective.a);
  opt("b", p.objective.b);
  for (const auto& [key, value] : obj.items()) {
    if (key != "form" && key != "w" && key != "alpha" && key != "y" && key != "a" && key != "b") {
      fail(ErrorCode::SchemaError, "unknown objective key '" + key + "'");
    }
  }
  if (j.contains("borrow_cost")) p.borrow_cost = numbers(j.at("borrow_cost"), "borrow_cost");

  const json& periods = field(j, "periods", "problem");
  if (!periods.is_array()) fail(ErrorCode::SchemaError, "periods must be an array");
  for (size_t t = 0; t < periods.size(); ++t) {
    const std::string where = fmt::format("periods[{}]", t);
    const json& pj = periods[t];
    if (!pj.is_object()) fail(ErrorCode::SchemaError, where + " must be an object");
    Period period;
    if (pj.contains("atoms")) {
      const json& atoms = pj.at("atoms");
      if (!atoms.is_array()) fail(ErrorCode::SchemaError, where + ".atoms must be an array");
      for (size_t k = 0; k < atoms.size(); ++k) {
        const std::string aw = fmt::format("{}.atoms[{}]", where, k);
        ScenarioAtom atom;
        atom.prob = number(field(atoms[k], "p", aw), aw + ".p");
        atom.returns = vector_of(field(atoms[k], "e", aw), aw + ".e");
        if (atom.returns.size() != n + 1) fail(ErrorCode::SchemaError, fmt::format("{}.e must have {} entries", aw, n + 1));
        period.atoms.push_back(std::move(atom));
      }
      try {
        period.moments = moments_from_scenarios(period.atoms, n);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ProbabilityNotNormalized || e.code() == ErrorCode::EmptyAtomList) throw;
        fail(ErrorCode::SchemaError, where + ": " + e.what());
      }
    }
    if (pj.contains("moments")) {
      const PeriodMoments stored = moments_of(pj.at("moments"), n, where + ".moments");
      if (!period.has_atoms()) period.moments = stored;
      else {
        const double diff = std::max({std::abs(stored.mean_ref - period.moments.mean_ref),
                                      std::abs(stored.second_ref - period.moments.second_ref),
                                      (stored.mean_excess - period.moments.mean_excess).cwiseAbs().maxCoeff(),
                                      (stored.cross - period.moments.cross).cwiseAbs().maxCoeff(),
                                      (stored.second_excess - period.moments.second_excess).cwiseAbs().maxCoeff()});
        if (diff > 1e-9) fail(ErrorCode::SchemaError, fmt::format("{} stored moments disagree with atoms by {:.3e}", where, diff));
      }
    }
    if (!pj.contains("atoms") && !pj.contains("moments")) fail(ErrorCode::SchemaError, where + " needs atoms or moments");
    p.model.periods.push_back(std::move(period));
  }
  check_problem(p);
  return p;
}

json moments_to_json(const PeriodMoments& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.second_excess.rows(); ++r) rows.push_back(vector_json(m.second_excess.row(r).transpose()));
  return {{"mean_ref", json_number(m.mean_ref)},
          {"second_ref", json_number(m.second_ref)},
          {"mean_excess", vector_json(m.mean_excess)},
          {"cross", vector_json(m.cross)},
          {"second_excess", rows}};
}

json problem_to_json(const ProblemSpec& p) {
  json obj = {{"form", std::string(objective_form_name(p.objective.form))}};
  auto put = [&](const char* key, const std::vector<double>& v) {
    if (!v.empty()) obj[key] = numbers_json(v);
  };
  put("w", p.objective.w);
  put("alpha", p.objective.alpha);
  put("y", p.objective.y);
  put("a", p.objective.a);
  put("b", p.objective.b);
  json j = {{"horizon", p.horizon}, {"x0", json_number(p.x0)}, {"n", p.model.n}, {"objective", obj}};
  if (p.borrow_cost) j["borrow_cost"] = numbers_json(*p.borrow_cost);
  json periods = json::array();
  for (const auto& period : p.model.periods) {
    json pj = json::object();
    if (period.has_atoms()) {
      json atoms = json::array();
      for (const auto& a : period.atoms) atoms.push_back({{"p", json_number(a.prob)}, {"e", vector_json(a.returns)}});
      pj["atoms"] = atoms;
    } else {
      pj["moments"] = moments_to_json(period.moments);
    }
    periods.push_back(pj);
  }
  j["periods"] = periods;
  return j;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::SchemaError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

ProblemSpec load_problem(const std::string& path) { return problem_from_json(load_json(path)); }

}  // namespace resalloc

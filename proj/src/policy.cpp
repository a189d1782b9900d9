#include "policy.hpp"

#include "errors.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace resalloc {
namespace {

nlohmann::json vector_json(const VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_number(j[i]);
  return v;
}

}  // namespace

bool AffineLaw::approx_equal(const AffineLaw& o, double tol) const {
  if (offset.size() != o.offset.size()) return false;
  const double scale = 1.0 + std::max({offset.cwiseAbs().maxCoeff(), o.offset.cwiseAbs().maxCoeff(),
                                       slope.cwiseAbs().maxCoeff(), o.slope.cwiseAbs().maxCoeff()});
  return (offset - o.offset).cwiseAbs().maxCoeff() <= tol * scale &&
         (slope - o.slope).cwiseAbs().maxCoeff() <= tol * scale;
}

StageRule StageRule::make(std::vector<double> breakpoints, std::vector<AffineLaw> laws) {
  if (laws.empty() || laws.size() != breakpoints.size() + 1) {
    fail(ErrorCode::InvalidArgument, "stage rule needs k laws and k-1 breakpoints");
  }
  for (size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) fail(ErrorCode::InvalidArgument, "rule breakpoints must increase");
  }
  StageRule out;
  out.laws_.push_back(std::move(laws[0]));
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    if (out.laws_.back().approx_equal(laws[i + 1], 1e-10)) continue;
    out.breakpoints_.push_back(breakpoints[i]);
    out.laws_.push_back(std::move(laws[i + 1]));
  }
  return out;
}

size_t StageRule::law_index(double x) const {
  return static_cast<size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) - breakpoints_.begin());
}

std::pair<double, double> StageRule::interval(size_t k) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {k == 0 ? -inf : breakpoints_[k - 1], k == breakpoints_.size() ? inf : breakpoints_[k]};
}

nlohmann::json StageRule::to_json() const {
  nlohmann::json laws = nlohmann::json::array();
  for (const auto& law : laws_) laws.push_back({{"offset", vector_json(law.offset)}, {"slope", vector_json(law.slope)}});
  nlohmann::json breaks = nlohmann::json::array();
  for (double b : breakpoints_) breaks.push_back(json_number(b));
  return {{"breakpoints", breaks}, {"laws", laws}};
}

StageRule StageRule::from_json(const nlohmann::json& j) {
  std::vector<double> breaks;
  for (const auto& b : j.at("breakpoints")) breaks.push_back(parse_number(b));
  std::vector<AffineLaw> laws;
  for (const auto& law : j.at("laws")) {
    laws.push_back({vector_from_json(law.at("offset")), vector_from_json(law.at("slope"))});
    if (laws.back().offset.size() != laws.back().slope.size()) {
      fail(ErrorCode::SchemaError, "law offset and slope differ in length");
    }
  }
  return make(std::move(breaks), std::move(laws));
}

nlohmann::json policy_to_json(const Policy& policy) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rule : policy) out.push_back(rule.to_json());
  return out;
}

Policy policy_from_json(const nlohmann::json& j) {
  Policy out;
  for (const auto& r : j) out.push_back(StageRule::from_json(r));
  return out;
}

Policy zero_policy(int horizon, int n) {
  return Policy(static_cast<size_t>(horizon), StageRule(AffineLaw{VectorXd::Zero(n), VectorXd::Zero(n)}));
}

}  // namespace resalloc

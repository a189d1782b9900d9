#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <utility>
#include <vector>

namespace resalloc {

using Eigen::VectorXd;

// u = offset + slope * x
struct AffineLaw {
  VectorXd offset;
  VectorXd slope;

  VectorXd operator()(double x) const { return offset + slope * x; }
  bool approx_equal(const AffineLaw& o, double tol) const;
};

// Piecewise-affine allocation rule x_{t-1} -> u_t for one period.
class StageRule {
 public:
  StageRule() = default;
  explicit StageRule(AffineLaw single) : laws_{std::move(single)} {}

  // Adjacent identical laws are merged.
  static StageRule make(std::vector<double> breakpoints, std::vector<AffineLaw> laws);

  VectorXd operator()(double x) const { return laws_[law_index(x)](x); }
  size_t law_index(double x) const;
  std::pair<double, double> interval(size_t k) const;

  int n() const { return laws_.empty() ? 0 : static_cast<int>(laws_.front().offset.size()); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<AffineLaw>& laws() const { return laws_; }

  nlohmann::json to_json() const;
  static StageRule from_json(const nlohmann::json& j);

 private:
  std::vector<double> breakpoints_;
  std::vector<AffineLaw> laws_;
};

// One rule per period, in period order.
using Policy = std::vector<StageRule>;

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);

// u = 0 in every period.
Policy zero_policy(int horizon, int n);

}  // namespace resalloc

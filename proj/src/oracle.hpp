#pragma once

#include "model.hpp"
#include "policy.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace resalloc {

// Grid: every node searches a uniform grid of per-entity allocations over
// [-|x|, |x|] (or [0, x] with nonneg). Line: intermediate nodes use nested
// Brent line searches and last-period nodes are solved exactly by face
// enumeration.
enum class OracleSearch { Grid, Line };

struct OracleOptions {
  OracleSearch search = OracleSearch::Grid;
  int grid = 201;
  bool nonneg = false;
};

struct TreeNode {
  std::vector<int> history;  // atom index per elapsed period
  double x = 0.0;            // resource entering the node's period
  VectorXd u;
};

struct TreePolicy {
  std::vector<TreeNode> nodes;

  const TreeNode* find(const std::vector<int>& history) const;
};

struct Evaluation {
  std::vector<double> means;
  std::vector<double> variances;
  std::vector<double> seconds;    // E[x_t^2]
  std::vector<double> overdraft;  // E[(1'u_t - x_{t-1})^+]
  double objective = 0.0;         // of the problem's declared form
};

struct OracleResult {
  double objective = 0.0;  // tree optimum found by the search
  TreePolicy policy;
  Evaluation evaluation;   // exact moments of the returned tree policy
};

// Exhaustive search over the scenario tree of a Separable problem.
// Throws InstanceTooLarge outside T <= 3, n <= 2, <= 3 atoms per period,
// grid <= 2001, or when the estimated work is too large.
OracleResult oracle_solve(const ProblemSpec& problem, const OracleOptions& options = {});

// Allocation for period t (0-based) given the resource entering it.
using PolicyFn = std::function<VectorXd(int t, double x)>;

PolicyFn policy_fn(const Policy& policy);

// Exact moments by traversal of the full tree (at most 1e6 leaves).
Evaluation oracle_evaluate(const ProblemSpec& problem, const PolicyFn& policy);

}  // namespace resalloc

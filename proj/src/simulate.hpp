#pragma once

#include "model.hpp"
#include "oracle.hpp"
#include "policy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace resalloc {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct PeriodEstimate {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_var = 0.0;
  Interval mean_ci;  // 95%
  Interval var_ci;
  double overdraft = 0.0;  // sample mean of (1'u - x)^+
};

struct SimSummary {
  std::uint64_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<PeriodEstimate> periods;
  double objective = 0.0;  // declared form, from the sample moments
  double objective_se = 0.0;
  Interval objective_ci;
};

struct SimOptions {
  std::uint64_t paths = 100000;
  std::uint64_t seed = 42;
  int threads = 0;  // 0: hardware concurrency
};

// Atom index drawn in each period for one path. Depends only on
// (seed, path), so paths can be generated in any order.
std::vector<int> draw_path(const ProblemSpec& problem, std::uint64_t seed, std::uint64_t path);

SimSummary simulate_policy(const ProblemSpec& problem, const PolicyFn& policy, const SimOptions& options = {});
SimSummary simulate_policy(const ProblemSpec& problem, const Policy& policy, const SimOptions& options = {});

struct MomentTrajectory {
  std::vector<double> means;
  std::vector<double> seconds;
  std::vector<double> variances;
  std::vector<double> overdraft;
  double objective = 0.0;
};

// Exact moments for a policy that is affine on every reachable interval.
// Reachable intervals are hulls over atoms; a moment-only period makes the
// following intervals unbounded. Throws RegimeCrossing when an interval
// spans a breakpoint of the rule or a sign change of the overdraft.
MomentTrajectory propagate_moments(const ProblemSpec& problem, const Policy& policy);

nlohmann::json sim_summary_to_json(const SimSummary& s);
// period,mean,var,se_mean,se_var
std::string sim_summary_to_csv(const SimSummary& s);

}  // namespace resalloc

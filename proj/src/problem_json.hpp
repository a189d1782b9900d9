#pragma once

#include "model.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace resalloc {

// Problem document:
//   {"horizon", "x0", "n",
//    "objective": {"form", "w", "alpha" | "y" | "a" and "b"},
//    "borrow_cost" (optional),
//    "periods": [{"atoms": [{"p", "e": [n+1]}]} | {"moments": {...}}]}
// Moments keys: mean_ref, second_ref, mean_excess, cross, second_excess
// (array of rows). Numbers may be JSON numbers or decimal strings.
// Throws SchemaError.
ProblemSpec problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemSpec& problem);

nlohmann::json moments_to_json(const PeriodMoments& m);

ProblemSpec load_problem(const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace resalloc

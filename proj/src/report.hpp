#pragma once

#include "model.hpp"
#include "solve.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace resalloc {

// Policy, value pieces, coefficients and exact moments. The "policy" key
// reads back with policy_from_json.
nlohmann::json solve_report_to_json(const ProblemSpec& problem, const SolveReport& report);

// One line per check, then "assumption1: pass" or "assumption1: fail (<check>)".
std::string validation_text(const std::vector<ValidationReport>& reports);
nlohmann::json validation_json(const std::vector<ValidationReport>& reports);

std::string compare_text(const std::vector<CompareRow>& rows);
nlohmann::json compare_json(const std::vector<CompareRow>& rows);

}  // namespace resalloc

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agediff {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Run the full acceptance suite, streaming one [PASS]/[FAIL] line per
/// criterion to `out` as it completes. A criterion that throws is reported
/// as failed with the error text. Every tolerance is pinned inside the
/// checks; nothing here is configurable by design.
std::vector<CriterionResult> run_acceptance_suite(std::ostream& out);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace agediff

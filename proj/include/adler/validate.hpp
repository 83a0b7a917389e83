#pragma once

#include <string>
#include <vector>

namespace adler {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Runs the oracle suite: finite-difference agreement, transpose
/// consistency, Q-form equivalence, PSD, decomposition closure, quadratic
/// exactness of the adaptive rate, and the EWMA closed form. `quick` trims
/// trial counts for fast smoke runs.
std::vector<CheckResult> run_validation(bool quick);

}  // namespace adler

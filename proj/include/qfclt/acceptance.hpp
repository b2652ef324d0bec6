#pragma once

// The acceptance bundles: each criterion is a self-contained experiment with
// pinned tolerances that reports its headline metric and a pass flag.

#include "qfclt/runner.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qfclt::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    /// Failure produces a warning instead of failing the suite.
    bool exploratory = false;
    double metric = 0.0;
    std::string requirement;
    std::string detail;
    double runtime_limit = 0.0;  // seconds, 0 when unconstrained
};

struct SuiteOptions {
    std::uint64_t seed = 1;
    int threads = 0;
    /// Shorter N and radius grids for quick runs.
    bool reduced = false;
};

int criterion_count();
/// identities, rates, lattice or all. Unknown names throw ValidationError.
std::vector<int> suite_members(const std::string& name);

CriterionResult run_criterion(int id, const SuiteOptions& opts);
std::vector<CriterionResult> run_suite(const std::string& name, const SuiteOptions& opts);

/// criterion,name,status,metric,requirement,detail
runner::Table summary_table(const std::vector<CriterionResult>& results);
bool suite_passed(const std::vector<CriterionResult>& results);

}  // namespace qfclt::acceptance

#pragma once

#include <string>
#include <vector>

#include "bira/gradcheck.hpp"

namespace bira {

struct GradSuiteEntry {
    std::string name;
    double worst_rel_err = 0.0;
    double tolerance = 1e-4;
    bool passed() const { return worst_rel_err < tolerance; }
};

// Scopes mirror the CLI: ops | attention | bilinear | loss | full.
std::vector<GradSuiteEntry> grad_suite(const std::string& scope, std::uint64_t seed,
                                       int seeds_per_check = 20);

std::vector<std::string> grad_suite_scopes();

}  // namespace bira

#pragma once

#include <string>
#include <vector>

namespace scsm::gradcheck {

struct SuiteResult {
    std::string name;
    double worst_error;
};

// Finite-difference suites per module. Selector is one of
// {rope, dct, smg, sca, model, all}; unknown selectors throw ConfigError.
std::vector<SuiteResult> run(const std::string& selector);

}  // namespace scsm::gradcheck

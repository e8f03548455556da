#pragma once

#include <iosfwd>

#include "hetreg/train.hpp"

namespace hetreg::verify {

struct PropertyResult {
    std::string module;
    std::string name;
    bool pass = false;
    std::uint64_t samples = 0;
    /// Worst-case slack against the property's tolerance; <= 0 passes.
    double worst_margin = 0.0;
    std::string detail;
};

struct Property {
    std::string module;
    std::string name;
    std::function<PropertyResult()> fn;
};

/// Union of every module's property suite. Adding a property here without
/// updating the per-module counts fails the registry-complete meta-check.
const std::vector<Property> &property_suite();

/// Runs properties whose "module/name" contains `filter` (all when empty).
std::vector<PropertyResult> run_properties(const std::string &filter = "");

/// One line per property; returns true when everything passed.
bool report(std::ostream &out, const std::vector<PropertyResult> &results);

// Shared samplers, reused by tests.
Matrix random_spd_matrix(std::size_t dim, std::mt19937_64 &rng);
Gaussian random_gaussian(std::size_t dim, std::mt19937_64 &rng);

} // namespace hetreg::verify

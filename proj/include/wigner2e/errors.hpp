#pragma once

#include <stdexcept>
#include <string>

namespace wigner2e {

// Malformed or inconsistent input (bad sizes, nonpositive widths, mismatched grids).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input is well-formed but outside the region where the operation is defined.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Requested problem size exceeds the configured cell/memory budget.
struct CostGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A run-time numerical check failed (boundary contact, normalization drift).
struct NumericalGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace wigner2e

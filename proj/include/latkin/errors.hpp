#pragma once

#include <stdexcept>
#include <string>

namespace latkin {

// Bad or inconsistent configuration (unknown key, mismatched grids, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-convergence, degenerate eigenproblem, singular solve.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A certified model assumption failed (e.g. non-decaying reservoir memory).
// Downstream modules refuse to run when they see this.
struct AssumptionViolation : std::runtime_error {
    explicit AssumptionViolation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace latkin

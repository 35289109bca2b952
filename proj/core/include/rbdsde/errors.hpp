#ifndef RBDSDE_ERRORS_HPP
#define RBDSDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rbdsde {

/// Bad experiment configuration (schema, ranges, cross-field constraints).
/// The message names the offending field with a dotted path, e.g. "drivers.g.alpha".
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally invalid input to an operation (sizes, ordering, unsupported
/// restriction), detected before any numerics run.
class InvalidInputError : public std::runtime_error {
public:
    explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Grid too coarse for the requested computation (e.g. lambda*dt >= 1, or an
/// implicit fixed point with L_f*dt >= 1).
class StepSizeError : public InvalidInputError {
public:
    explicit StepSizeError(const std::string& what) : InvalidInputError(what) {}
};

/// Numerical breakdown: singular one-step Gram matrix, non-finite values,
/// detected degeneracy.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A structural assumption the computation relies on fails on concrete data
/// (e.g. a stochastic-exponential step factor is not positive). The message
/// names the first offending step.
class AssumptionViolationError : public NumericalError {
public:
    explicit AssumptionViolationError(const std::string& what) : NumericalError(what) {}
};

/// Internal cross-check failed: two ways of computing the same quantity
/// disagree beyond tolerance. Always a bug or a mis-used API, never data.
class ConsistencyError : public NumericalError {
public:
    explicit ConsistencyError(const std::string& what) : NumericalError(what) {}
};

/// An iterative scheme failed to meet its tolerance within the iteration cap.
class DivergenceError : public NumericalError {
public:
    explicit DivergenceError(const std::string& what) : NumericalError(what) {}
};

} // namespace rbdsde

#endif

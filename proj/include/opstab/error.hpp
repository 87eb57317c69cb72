#pragma once

#include <stdexcept>
#include <string>

namespace opstab {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (j = 0, eps <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Vector kind or branch layout does not match the operator's space.
class KindMismatch : public Error {
public:
    using Error::Error;
};

/// Index arithmetic or period computation would overflow.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Operator, measure or file content violates a structural invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Operator is not in the class an operation requires (isometry, unitary, ...).
class ClassMismatch : public Error {
public:
    using Error::Error;
};

/// Iteration cap exceeded or a numerical certificate could not be established.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, double best_estimate = 0.0)
        : Error(what), best_estimate_(best_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

} // namespace opstab

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace whipdyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Field lengths or grid sizes that do not fit together.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a map (e.g. a negative radius).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iteration failed to converge or produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A linear system with a (numerically) zero pivot. When the singularity is
/// structural the null direction is attached.
class SingularSystemError : public Error {
public:
    explicit SingularSystemError(const std::string& what, std::vector<double> null_direction = {})
        : Error(what), null_direction_(std::move(null_direction)) {}

    const std::vector<double>& null_direction() const noexcept { return null_direction_; }

private:
    std::vector<double> null_direction_;
};

/// Time step larger than the stability restriction of the stepper.
class StepSizeError : public Error {
public:
    StepSizeError(const std::string& what, double dt, double dt_max)
        : Error(what), dt_(dt), dt_max_(dt_max) {}
    double dt() const noexcept { return dt_; }
    double dt_max() const noexcept { return dt_max_; }

private:
    double dt_;
    double dt_max_;
};

/// A trajectory left the finite range (field norm above the blow-up threshold).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// The constrained solver exceeded its drift budget.
class ConstraintError : public Error {
public:
    ConstraintError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// One violated invariant of input data.
struct Violation {
    std::string condition;
    std::ptrdiff_t node = -1;  // -1 when not attached to a node
    double value = 0.0;
};

/// Input data breaking one or more invariants; every violation is listed.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(format(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string format(const std::vector<Violation>& vs) {
        std::string msg = "validation failed:";
        for (const auto& v : vs) {
            msg += " [" + v.condition;
            if (v.node >= 0) msg += " at node " + std::to_string(v.node);
            msg += " (value " + std::to_string(v.value) + ")]";
        }
        return msg;
    }

    std::vector<Violation> violations_;
};

/// Malformed configuration text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string key, std::size_t line = 0)
        : Error(what), key_(std::move(key)), line_(line) {}
    const std::string& key() const noexcept { return key_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string key_;
    std::size_t line_;
};

/// Integrand rejected by the pairing (no valid 2-homogeneous recession).
class InvalidIntegrandError : public Error {
public:
    using Error::Error;
};

}  // namespace whipdyn

#pragma once

#include <stdexcept>
#include <string>

namespace chiralflow {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an input value does not hold.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Two inputs that must share a grid (or a configuration) do not.
class MismatchError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, trace drift or other numerical breakdown.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An adaptive integration did not reach its requested tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double achieved)
        : Error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}

    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace chiralflow

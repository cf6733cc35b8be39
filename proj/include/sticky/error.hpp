#pragma once

#include <stdexcept>
#include <string>

namespace sticky {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a quadrature cannot certify the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what + " (achieved error bound " + std::to_string(achieved) + ")"), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Raised when a computed object violates one of its invariants; names the offending entry.
class InvariantError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sticky

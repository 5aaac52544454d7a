#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cloudmkt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Market parameters violate one or more model invariants.
/// Carries the full list of violations, not just the first one found.
class InvalidParamsError : public Error {
public:
    explicit InvalidParamsError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string> &violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string> &v) {
        std::string out = "invalid market parameters:";
        for (const auto &s : v) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

/// Spot load at the given cutoffs is at or beyond capacity; waiting times diverge.
class UnstableError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain where the quantity is defined.
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

/// PAYG price must be strictly positive.
class InvalidPriceError : public Error {
public:
    using Error::Error;
};

/// A root finder could not bracket or converge.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Config file could not be parsed.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cloudmkt

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apegp {

/// Bad dimensions, out-of-domain inputs, non-finite scalars.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Cholesky factorization failed even after jitter escalation.
class IllConditionedMatrix : public std::runtime_error {
public:
    IllConditionedMatrix(const std::string& what, double jitter)
        : std::runtime_error(what + " (last jitter tried: " + std::to_string(jitter) + ")"),
          jitter_(jitter) {}

    [[nodiscard]] double jitter() const noexcept { return jitter_; }

private:
    double jitter_;
};

/// F^T R^-1 F is rank deficient, so the trend coefficients are not identifiable.
class DegenerateTrend : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every candidate split dimension leaves a side with too few points.
class NoValidSplit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Test-set responses have zero spread, so scaled metrics are undefined.
class DegenerateTestSet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace apegp

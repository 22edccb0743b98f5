#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kparab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is a byte offset into the source.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : Error(message + " at offset " + std::to_string(offset)), offset_(offset), detail_(message) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t offset_;
    std::string detail_;
};

class UnknownIdentifier : public Error {
public:
    UnknownIdentifier(const std::string& name, std::size_t offset)
        : Error("unknown identifier '" + name + "' at offset " + std::to_string(offset)),
          name_(name), offset_(offset) {}

    const std::string& name() const noexcept { return name_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string name_;
    std::size_t offset_;
};

/// Evaluation left the domain of an operation (log of a negative, division by zero, ...).
class DomainError : public Error {
public:
    DomainError(const std::string& message, std::string subexpression)
        : Error(message + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

/// Inconsistent or invalid input specification.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Numerical procedure failed (non-finite values, regularity loss, non-convergence).
class NumericError : public Error {
public:
    using Error::Error;
};

/// A finite parameter end lies at infinite arc length, beyond what t(s) can resolve.
class UnresolvedParameterEnd : public NumericError {
public:
    using NumericError::NumericError;
};

/// A curve left floating-point range (its own coordinates overflowed) while a tail was followed.
class RangeHorizon : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace kparab

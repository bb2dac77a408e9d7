#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace starts {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix or vector shapes do not conform (T < 2, non-square input, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// B'SB has no eigenvalue above the retention threshold.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Invalid option or distribution parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV / config input. Row and column are 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : Error(format(what, row, column)), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column) {
        if (row == 0) return what;
        std::string msg = what + " (row " + std::to_string(row);
        if (column != 0) msg += ", column " + std::to_string(column);
        return msg + ")";
    }
    std::size_t row_;
    std::size_t column_;
};

/// Recorded file hash does not match the file on disk.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Numeric differentiation produced non-finite values.
class NumericDerivativeError : public Error {
public:
    using Error::Error;
};

/// Every start of a multi-start estimator failed. Carries one message per start.
class EstimationFailure : public Error {
public:
    EstimationFailure(const std::string& what, std::vector<std::string> per_start)
        : Error(what), per_start_(std::move(per_start)) {}

    const std::vector<std::string>& per_start() const noexcept { return per_start_; }

private:
    std::vector<std::string> per_start_;
};

}  // namespace starts

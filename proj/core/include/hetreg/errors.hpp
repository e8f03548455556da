#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hetreg {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// The p-side distribution of a divergence has a singular covariance.
class DegenerateDistribution : public Error {
public:
    using Error::Error;
};

class TooFewSamples : public Error {
public:
    using Error::Error;
};

class TooFewColumns : public Error {
public:
    using Error::Error;
};

class KOutOfRange : public Error {
public:
    using Error::Error;
};

class UnknownVariant : public Error {
public:
    using Error::Error;
};

class MissingGroundTruth : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class CycleDetected : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::size_t col, const std::string &what)
        : Error("parse error at row " + std::to_string(row) + ", col " + std::to_string(col) +
                ": " + what),
          row_(row),
          col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_ = 0;
    std::size_t col_ = 0;
};

class ConfigError : public Error {
public:
    ConfigError(std::size_t line, const std::string &what)
        : Error("config error at line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

} // namespace hetreg

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhys {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (dimension mismatch, ragged matrices).
class ShapeError : public Error {
public:
    using Error::Error;

    ShapeError(const std::string& what, std::size_t expected, std::size_t actual)
        : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
                std::to_string(actual)) {}
};

/// A precondition of an operation was violated by its caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Corpus or query data is internally inconsistent.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Optimization produced a non-finite loss.
class TrainingError : public Error {
public:
    TrainingError(std::size_t epoch, std::size_t step, const std::string& what)
        : Error("training diverged at epoch " + std::to_string(epoch) + ", step " +
                std::to_string(step) + ": " + what),
          epoch_(epoch), step_(step) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t epoch_;
    std::size_t step_;
};

}  // namespace mhys

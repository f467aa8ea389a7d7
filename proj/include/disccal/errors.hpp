#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace disccal {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    /// Short machine-readable tag, e.g. "ParseError".
    virtual const char* kind() const noexcept { return "Error"; }
};

class BoundsViolation : public Error {
public:
    BoundsViolation(std::size_t param_index, double value)
        : Error("parameter " + std::to_string(param_index + 1) + " out of bounds: " + std::to_string(value)),
          param_index_(param_index) {}
    const char* kind() const noexcept override { return "BoundsViolation"; }
    std::size_t param_index() const noexcept { return param_index_; }

private:
    std::size_t param_index_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& detail)
        : Error("line " + std::to_string(line) + ": " + detail), line_(line), detail_(detail) {}
    /// Same error, prefixed with the file it came from.
    ParseError(const std::string& source, const ParseError& inner)
        : Error(source + ":" + std::to_string(inner.line()) + ": " + inner.detail()),
          line_(inner.line()), detail_(inner.detail()) {}
    const char* kind() const noexcept override { return "ParseError"; }
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

class IncompleteConfig : public Error {
public:
    explicit IncompleteConfig(std::int64_t config_id)
        : Error("config " + std::to_string(config_id) + " does not cover the full load grid"),
          config_id_(config_id) {}
    const char* kind() const noexcept override { return "IncompleteConfig"; }
    std::int64_t config_id() const noexcept { return config_id_; }

private:
    std::int64_t config_id_;
};

class ShapeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ShapeError"; }
};

class FrozenRequired : public Error {
public:
    FrozenRequired() : Error("operation requires a frozen network") {}
    const char* kind() const noexcept override { return "FrozenRequired"; }
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error("dataset is empty") {}
    const char* kind() const noexcept override { return "EmptyDataset"; }
};

class GridMismatch : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "GridMismatch"; }
};

class DegenerateVariance : public Error {
public:
    explicit DegenerateVariance(const std::string& load_case)
        : Error("target RoM is constant within load case " + load_case), load_case_(load_case) {}
    const char* kind() const noexcept override { return "DegenerateVariance"; }
    const std::string& load_case() const noexcept { return load_case_; }

private:
    std::string load_case_;
};

class DatasetMissing : public Error {
public:
    explicit DatasetMissing(const std::string& path) : Error("dataset not found: " + path) {}
    const char* kind() const noexcept override { return "DatasetMissing"; }
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what) : Error(path + ": " + what) {}
    const char* kind() const noexcept override { return "IoError"; }
};

} // namespace disccal

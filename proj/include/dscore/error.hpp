#pragma once

#include <stdexcept>
#include <string>

namespace dscore {

// Error families map one-to-one onto CLI exit codes.
enum class ErrorKind {
    Input = 1,
    Numeric = 2,
    Policy = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Malformed files, schema violations, unknown codes, version mismatches.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// Parse failure at a known line of a delimited file.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Refusals that are policy, not malformed input (e.g. too much missing weight mass).
class PolicyError : public Error {
public:
    explicit PolicyError(const std::string& what) : Error(ErrorKind::Policy, what) {}
};

}  // namespace dscore

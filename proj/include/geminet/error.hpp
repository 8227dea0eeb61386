#pragma once

#include <stdexcept>
#include <string>

namespace geminet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or invalid argument (CLI exit code 2).
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed file or dataset content (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Numerical solver failure (CLI exit code 4).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace geminet

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wbary {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the operation's domain (x outside [0,1], empty sample, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A structural invariant of an input was violated (non-monotone quantile, ...).
class InvariantError : public Error {
public:
    using Error::Error;
};

class UnsupportedDistribution : public Error {
public:
    using Error::Error;
};

// Numerical procedure failed to reach the requested precision.
class PrecisionError : public Error {
public:
    using Error::Error;
};

class DegenerateSample : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace wbary

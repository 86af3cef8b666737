#pragma once

#include <stdexcept>
#include <string>

namespace splinth {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to a library call (bad m, λ ≤ 0, z outside [0,1], shape mismatch).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: eigensolver breakdown, singular plug-in matrix, nesting violation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (CSV contents, dataset invariants).
class DataError : public Error {
public:
    using Error::Error;
};

/// Operation not defined for the requested family or mode.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Command-line misuse.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace splinth

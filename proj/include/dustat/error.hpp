#pragma once

#include <stdexcept>
#include <string>

namespace dustat {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map the category onto an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid settings: fold counts, grids, missing columns, bad flags.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or non-finite input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// The data are well formed but the estimand is undefined on them
/// (nonpositive Gini denominator, non-binary labels, no treated units...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Singular systems, non-convergence, non-finite kernel values.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Caller misuse, e.g. predicting with the wrong column count.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace dustat

#pragma once

#include <stdexcept>
#include <string>

namespace pks {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array shapes disagree with the grid they claim to live on.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise unusable numerical data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Operation called in a regime it does not handle.
class MisuseError : public Error {
public:
    using Error::Error;
};

/// Invariant broken inside a numerical kernel.
class InternalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace pks

#pragma once

#include <stdexcept>
#include <string>

namespace aerothreat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or schema.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem access failed (missing directory, unwritable path, ...).
class IoError : public Error {
public:
    using Error::Error;
};

/// An image file could not be decoded.
class DecodeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Operation called in the wrong state (e.g. backward without a forward cache).
class StateError : public Error {
public:
    using Error::Error;
};

/// No threat rule matched and the ruleset has no default level.
class UnannotatableError : public Error {
public:
    using Error::Error;
};

}  // namespace aerothreat

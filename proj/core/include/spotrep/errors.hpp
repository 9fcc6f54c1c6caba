#pragma once

#include <stdexcept>
#include <string>

namespace spotrep {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument violates a precondition (bad size, range, or option).
class ParamError : public Error {
public:
    using Error::Error;
};

/// An operation was requested in an invalid state (e.g. eval-mode batch
/// norm before any training batch, or a stale checkpoint).
class StateError : public Error {
public:
    using Error::Error;
};

/// A numerically degenerate input: zero-norm row, zero-total spot.
/// The message names the offending row/spot index.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Misuse of the gradient tape (foreign node, non-scalar loss).
class TapeError : public Error {
public:
    using Error::Error;
};

/// A problem reading or validating input files; carries file/line context.
class IngestError : public Error {
public:
    using Error::Error;
};

/// A problem in a run configuration document; names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given partition (e.g. silhouette with a
/// single cluster).
class MetricError : public Error {
public:
    using Error::Error;
};

} // namespace spotrep

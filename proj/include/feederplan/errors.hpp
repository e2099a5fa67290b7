#pragma once

#include <stdexcept>
#include <string>

namespace feederplan {

// Base class for all errors raised by this library. The CLI catches this
// type and maps it to a nonzero exit code with a stage-labeled message.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text. Message carries the 1-based line number.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally well-formed input that violates a model invariant
// (duplicate ids, bad bounds, price ordering, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Closed branches do not form a tree.
class RadialityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A bus has no closed path to the root.
class ConnectivityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Bad run configuration (missing files, inconsistent settings).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Mixture fitting failed (insufficient or degenerate data).
class FitError : public Error {
public:
    using Error::Error;
};

// Out-of-range or dimensionally inconsistent arguments.
class InputError : public Error {
public:
    using Error::Error;
};

// Filesystem read/write failure; message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

// An ADMM agent's local constraint set is empty.
class InfeasibleAgentError : public Error {
public:
    using Error::Error;
};

} // namespace feederplan

#pragma once

#include <stdexcept>
#include <string>

namespace paewc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid input value (bad precondition, out-of-range argument, empty set).
struct ValueError : Error {
    using Error::Error;
};

// Mathematical domain violation (e.g. softmax over an empty axis).
struct DomainError : Error {
    using Error::Error;
};

// Invalid object state (tape re-entry, incomplete run record, anchor mismatch).
struct StateError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericError : Error {
    using Error::Error;
};

// File I/O failures.
struct IoError : Error {
    using Error::Error;
};

// Checkpoint/snapshot container problems, kept distinct so callers can tell
// a bad file apart from a wrong-version or short one.
struct FormatError : IoError {
    using IoError::IoError;
};
struct VersionError : IoError {
    using IoError::IoError;
};
struct TruncationError : IoError {
    using IoError::IoError;
};

}  // namespace paewc

#pragma once

#include <stdexcept>
#include <string>

namespace ctxinsert {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A box with non-positive extent or non-finite coordinates.
struct InvalidGeometryError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (files, records, CLI payloads).
struct ValidationError : Error {
    using Error::Error;
};

// Training was asked to run on a corpus with no usable records.
struct EmptyCorpusError : ValidationError {
    using ValidationError::ValidationError;
};

// A mixture fit was requested on an empty sample list.
struct NoSamplesError : Error {
    using Error::Error;
};

// A model file failed its integrity check or cannot be parsed.
struct CorruptModelError : ValidationError {
    using ValidationError::ValidationError;
};

// A model file declares a format version this build does not understand.
struct UnsupportedVersionError : ValidationError {
    using ValidationError::ValidationError;
};

// An internal invariant did not hold; indicates a bug, not bad input.
struct ContractViolationError : Error {
    using Error::Error;
};

}  // namespace ctxinsert

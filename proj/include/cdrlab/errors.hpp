#pragma once

#include <stdexcept>
#include <string>

namespace cdrlab {

/// Base class for all cdrlab errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A sample carries a context id outside [0, K).
struct InvalidContextError : Error {
    using Error::Error;
};

/// An operation that needs at least one sample received none.
struct EmptyBatchError : Error {
    using Error::Error;
};

/// Tuning vector has the wrong length or an entry outside [0, 1].
struct InvalidTuningError : Error {
    using Error::Error;
};

/// Epoch index outside {1, ..., E}.
struct InvalidEpochError : Error {
    using Error::Error;
};

/// NaN or Inf surfaced in a forward pass, loss, or gradient.
struct NumericError : Error {
    using Error::Error;
};

/// Device position inside a building, or otherwise outside free space.
struct InvalidPositionError : Error {
    using Error::Error;
};

/// Loss-map grid lies outside the scene bounds.
struct InvalidGridError : Error {
    using Error::Error;
};

/// Rejection sampling could not place a point (degenerate scene).
struct GenerationError : Error {
    using Error::Error;
};

/// Malformed config/dataset/scene/checkpoint file, or missing path.
struct FileError : Error {
    using Error::Error;
};

/// Config field failed validation; message names the field path.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace cdrlab

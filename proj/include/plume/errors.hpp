#pragma once

#include <stdexcept>
#include <string>

namespace plume {

// Error taxonomy. Each class maps to a distinct CLI exit code, and tests
// discriminate on the concrete type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (channel mismatch, ragged elementwise args).
struct ShapeError : Error {
  using Error::Error;
};

// An API precondition was violated (non-scalar backward, missing state, ...).
struct ContractError : Error {
  using Error::Error;
};

// A configuration fails validation before any work starts.
struct ConfigError : Error {
  using Error::Error;
};

// The synthetic-data generator cannot satisfy its constraints.
struct GenerationError : Error {
  using Error::Error;
};

// Storage failures, split by cause so loads can report precisely.
struct StorageError : Error {
  using Error::Error;
};
struct VersionMismatchError : StorageError {
  using StorageError::StorageError;
};
struct TruncatedPayloadError : StorageError {
  using StorageError::StorageError;
};
struct ChecksumError : StorageError {
  using StorageError::StorageError;
};

// Training hit a non-finite loss; message carries iteration and term values.
struct TrainingDivergedError : Error {
  using Error::Error;
};

}  // namespace plume

#pragma once

#include <stdexcept>
#include <string>

namespace metamt {

// Error taxonomy. Everything derives from std::runtime_error so callers that
// do not care about the kind can catch one type at the boundary.

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a forward operation produces NaN/Inf or an optimizer sees a
// non-finite gradient. The message names the producing operation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated API contract (e.g. backward on a non-scalar loss).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed external file (embedding tables, BPE models, vocab files).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint loading failures are split into distinct kinds so callers can
// tell a stale file from a corrupt one from a config mismatch.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};

struct CheckpointChecksumError : CheckpointError {
  using CheckpointError::CheckpointError;
};

struct CheckpointPathError : CheckpointError {
  using CheckpointError::CheckpointError;
};

}  // namespace metamt

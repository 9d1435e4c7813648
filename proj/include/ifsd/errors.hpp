#pragma once

#include <stdexcept>
#include <string>

namespace ifsd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset ingestion and sampling.
struct DataError : Error {
  using Error::Error;
};
struct MalformedAnnotationError : DataError {
  using DataError::DataError;
};
struct UnknownCategoryError : DataError {
  using DataError::DataError;
};
struct DegenerateBoxError : DataError {
  using DataError::DataError;
};
struct InsufficientInstancesError : DataError {
  using DataError::DataError;
};
/// A sample violates the class contract of the phase that received it.
struct LabelContractError : DataError {
  using DataError::DataError;
};

// Checkpoint files.
struct CheckpointError : Error {
  using Error::Error;
};
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointConfigError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointCorruptError : CheckpointError {
  using CheckpointError::CheckpointError;
};

struct ConfigError : Error {
  using Error::Error;
};

/// Failure inside one training/evaluation phase; the message is prefixed with
/// the phase name.
struct PhaseError : Error {
  PhaseError(const std::string& phase, const std::string& what)
      : Error(phase + ": " + what), phase_name(phase) {}
  std::string phase_name;
};

}  // namespace ifsd

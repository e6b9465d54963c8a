#pragma once

#include <stdexcept>
#include <string>

namespace maskwave {

// Malformed container or file contents (bad magic, truncated chunk, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed container holding an encoding we do not handle.
struct UnsupportedFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite math is required.
struct NumericDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Signal too short for the requested framing.
struct LengthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/vector dimensions.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter outside its legal range.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// API used against its documented contract (non-scalar backward, reused
// tape, untrained model, empty batch, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input that makes the operation undefined (silent signal for SNR, ...).
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training data that cannot support the task (single class, empty split).
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf loss encountered while optimizing.
struct TrainingDivergedError : std::runtime_error {
  TrainingDivergedError(const std::string& what, int epoch_index)
      : std::runtime_error(what), epoch(epoch_index) {}
  int epoch;
};

// Solver hit its iteration cap before meeting the stopping rule.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined on the given counts (empty true class).
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Overlap-add denominator vanished; cannot invert the transform.
struct ReconstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad key, value, or combination in a config file or programmatic config.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace maskwave

#pragma once

#include <stdexcept>

namespace dctkd {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, incompatibility (DimensionError across models,
// gangway mismatch) -> 3, NumericError -> 4.

// Tensor/map shape disagreement, non-integral conv output, etc.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API precondition violated (backward on non-scalar, flag-state misuse).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-facing input value (label out of range, k out of range).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (model config, ablation flags, CLI config files).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents (IDX, TNSRBOX1).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic data generation could not satisfy its constraints.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf detected where the no-NaN contract applies.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dctkd

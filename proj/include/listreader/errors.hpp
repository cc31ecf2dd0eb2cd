#pragma once

#include <stdexcept>

namespace listreader {

// Shape or dimension mismatch in a tensor operation.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A precondition of an API call was violated (wrong argument kind, bad call order).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad user-supplied data: datasets, checkpoints, command inputs.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: config files, generator settings, flag combinations.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem or serialization failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A forward or backward pass produced NaN or infinity.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace listreader

#pragma once

#include <stdexcept>
#include <string>

namespace mtopt {

// Invalid user-supplied configuration. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for the requested operation.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API precondition violated (non-scalar loss, empty input, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite arithmetic is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistic undefined for the given input (zero marginal, one-class labels).
struct UndefinedStatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss. The CLI maps this to exit code 3.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mtopt

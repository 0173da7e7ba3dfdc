#pragma once

#include <stdexcept>
#include <string>

namespace latbma {

// Invalid arguments or configuration (bad prior hyperparameters, mismatched
// dimensions, p above the enumeration cap, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The data violate a family constraint or a posterior-existence condition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fit produced a non-finite quantity or otherwise broke down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The selected design columns are numerically rank deficient. Callers that
// explore model space treat this as a model with zero prior mass.
class SingularSelectionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latbma

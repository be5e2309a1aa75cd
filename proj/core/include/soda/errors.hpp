#pragma once

#include <stdexcept>
#include <string>

namespace soda {

/// Raised when a model, plan or pipeline is assembled from inconsistent settings.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when tensors or maps reaching an operation have incompatible shapes.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for non-finite values where an operation requires finite input.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace soda

#pragma once

#include <stdexcept>
#include <string>

namespace pbglm {

// Bad input, configuration, or file contents. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during computation or training. The CLI maps these to exit code 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class CapacityError : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class SplitError : public InputError {
 public:
  using InputError::InputError;
};

class FileError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// Zero variance in a Poisson binomial; the normal approximation is undefined.
class DegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace pbglm

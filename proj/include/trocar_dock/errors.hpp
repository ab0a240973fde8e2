#pragma once

#include <stdexcept>
#include <string>

namespace trocar_dock {

// Zero-length or parallel inputs where a direction is required.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BehindCamera : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// No usable trocar signal in a confidence map (all-zero map, empty candidate set).
class NoDetection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientHistory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace trocar_dock

#pragma once

#include <stdexcept>
#include <string>

namespace awseg {

/// Malformed input bytes: wrong length, bad magic, truncated records.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input whose content violates an invariant (NaN coordinates,
/// novel labels in the source pool, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A required artifact of an earlier stage is missing.
class PrerequisiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace awseg

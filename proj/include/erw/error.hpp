#pragma once

#include <stdexcept>
#include <string>

namespace erw {

/// Invalid parameters or flags detected before any computation starts.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Index or time outside the range a table or process was built for.
class RangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Numerical procedure failed to converge; message carries diagnostics.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Persisted data is unreadable, corrupt, or from another schema version.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SchemaVersionError : public FormatError {
public:
  using FormatError::FormatError;
};

/// Filesystem failure; partial state on disk is left in place.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One or more replicas threw; the message lists the quarantined indices.
class EnsembleFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Run stopped on request after a checkpointed block.
class RunInterrupted : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define ERW_REQUIRE(Exc, cond, msg)                                            \
  do {                                                                         \
    if (!(cond)) throw Exc(std::string(msg));                                  \
  } while (0)

}  // namespace erw

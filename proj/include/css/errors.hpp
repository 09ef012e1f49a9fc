#pragma once

#include <stdexcept>

namespace css {

/// Invalid or inconsistent configuration (bad mapping file, unknown keys,
/// missing required checkpoint).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing or unreadable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// User-supplied data that violates an input contract.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint file malformed or incompatible with the runtime model.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace css

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qdistill {

/// Invalid user-supplied parameters or configuration (exit code 1 at the CLI).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Corrupt, truncated or mismatched data (exit code 2 at the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A frame stack ended early or carried a frame of the wrong size.
class CorruptStackError : public DataError {
 public:
  CorruptStackError(const std::string& what, std::uint64_t frame_index)
      : DataError(what + " (frame " + std::to_string(frame_index) + ")"),
        frame_index_(frame_index) {}

  std::uint64_t frame_index() const noexcept { return frame_index_; }

 private:
  std::uint64_t frame_index_;
};

}  // namespace qdistill

#pragma once

#include <stdexcept>
#include <string>

namespace more {

// Exit-code contract used by the CLI: 0 success, 2 usage, 3 data/format,
// 4 numerical divergence.

// Bad arguments, bad dimensions, violated preconditions.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent files (datasets, checkpoints, configs).
class DataFormatError : public std::runtime_error {
 public:
  explicit DataFormatError(const std::string& what)
      : std::runtime_error(what) {}
};

// NaN/Inf encountered where finite values are required.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace more

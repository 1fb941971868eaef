#pragma once

#include <stdexcept>
#include <string>

namespace psgan {

// Bad run configuration / preset. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File could not be read/written/decoded. CLI maps this to exit code 4.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during training. CLI maps this to exit code 3.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace psgan

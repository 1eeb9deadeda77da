#pragma once

#include <stdexcept>
#include <string>

namespace auda {

// Shape/dimension mismatches between tensors. The message names the
// offending dimension.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration values (indivisible input size, C=1 entropy, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external input (COCO manifest, config file, checkpoint).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures, always carrying the path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace auda

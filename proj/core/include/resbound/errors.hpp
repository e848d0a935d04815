#pragma once

#include <stdexcept>
#include <string>

namespace resbound {

// Bad or missing input data: files, headers, shapes, manifests. CLI exit 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure: non-finite losses, diverged optimization. CLI exit 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace resbound

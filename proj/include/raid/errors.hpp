#pragma once

#include <stdexcept>
#include <string>

namespace raid {

// Raised when an optimisation quantity stops being finite (NaN/Inf loss).
// The CLI maps this to its numerical-failure exit code.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace raid

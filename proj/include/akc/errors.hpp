#pragma once

#include <stdexcept>
#include <string>

namespace akc {

// code is a stable machine-readable name (SyntaxError, ValidationError,
// UnknownLabel, ...); detail is human-oriented.
struct AkcError : std::runtime_error {
  std::string code;
  std::string detail;

  AkcError(std::string c, std::string d)
      : std::runtime_error(c + ": " + d), code(std::move(c)), detail(std::move(d)) {}
};

}  // namespace akc

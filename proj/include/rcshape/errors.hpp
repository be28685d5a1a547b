#pragma once

#include <stdexcept>
#include <string>

namespace rcshape {

// Raised when a computation detects a numerically degenerate setting
// (vanishing variance, non-convergent design integrals, positivity
// diagnostics); the command line maps it to its own exit code.
class NumericalDiagnosticError : public std::runtime_error {
 public:
  explicit NumericalDiagnosticError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace rcshape

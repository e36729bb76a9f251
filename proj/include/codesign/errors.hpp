#ifndef CODESIGN_ERRORS_HPP
#define CODESIGN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace codesign {

// Bad user-supplied configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries row/column where known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between operands.
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure: ill-conditioning or non-convergence (CLI exit code 3).
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace codesign

#endif

#include "rodflow/error.hpp"

namespace rodflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::DomainError: return "domain_error";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::ConfigError: return "config_error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

NonConvergenceError::NonConvergenceError(const std::string& message, double estimate, double residual,
                                         int iterations)
    : Error(ErrorCode::NonConvergence, message),
      estimate_(estimate),
      residual_(residual),
      iterations_(iterations) {}

static std::string with_position(const std::string& message, int line, int column) {
  if (line <= 0) return message;
  return message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
}

ConfigError::ConfigError(const std::string& message, int line, int column)
    : Error(ErrorCode::ConfigError, with_position(message, line, column)), line_(line), column_(column) {}

void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

void require_same_dim(std::size_t expected, std::size_t actual, std::string_view what) {
  if (expected != actual) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected dimension " +
                                                  std::to_string(expected) + ", got " + std::to_string(actual));
  }
}

}  // namespace rodflow

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rodflow {

enum class ErrorCode {
  DimensionMismatch,
  NonFinite,
  DomainError,
  InvalidArgument,
  NonConvergence,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Iterative solver gave up; carries what it had.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, double estimate, double residual, int iterations);
  double estimate() const noexcept { return estimate_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double estimate_;
  double residual_;
  int iterations_;
};

// line/column are 1-based; 0 when unknown
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0, int column = 0);
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

void require(bool condition, ErrorCode code, const std::string& message);
void require_same_dim(std::size_t expected, std::size_t actual, std::string_view what);

}  // namespace rodflow

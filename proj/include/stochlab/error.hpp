#pragma once

#include <stdexcept>
#include <string>

namespace stochlab {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveTime,
  AliasingViolation,
  UnsupportedClosedForm,
  UnsupportedOrder,
  QuadratureNotConverged,
  MomentDivergence,
  NonPositiveData,
  InsufficientPoints,
  CompensatorQuadratureFailure,
  GridMismatch,
  PairOffGrid,
  EnsembleTooSmall,
  EmptyCylinder,
  EmptyRequest,
  DimensionMismatch,
  RadiusExceedsDiameter,
  SamplingBudgetTooSmall,
  ThetaOutOfEmbeddingRange,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

/// True for failures of a numerical procedure (as opposed to bad input).
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace stochlab

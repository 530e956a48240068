#include "stochlab/error.hpp"

namespace stochlab {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::AliasingViolation: return "AliasingViolation";
    case ErrorCode::UnsupportedClosedForm: return "UnsupportedClosedForm";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::MomentDivergence: return "MomentDivergence";
    case ErrorCode::NonPositiveData: return "NonPositiveData";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::CompensatorQuadratureFailure: return "CompensatorQuadratureFailure";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::PairOffGrid: return "PairOffGrid";
    case ErrorCode::EnsembleTooSmall: return "EnsembleTooSmall";
    case ErrorCode::EmptyCylinder: return "EmptyCylinder";
    case ErrorCode::EmptyRequest: return "EmptyRequest";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RadiusExceedsDiameter: return "RadiusExceedsDiameter";
    case ErrorCode::SamplingBudgetTooSmall: return "SamplingBudgetTooSmall";
    case ErrorCode::ThetaOutOfEmbeddingRange: return "ThetaOutOfEmbeddingRange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AliasingViolation:
    case ErrorCode::QuadratureNotConverged:
    case ErrorCode::CompensatorQuadratureFailure:
    case ErrorCode::NonPositiveData:
    case ErrorCode::InsufficientPoints:
    case ErrorCode::EmptyCylinder:
      return true;
    default:
      return false;
  }
}

}  // namespace stochlab

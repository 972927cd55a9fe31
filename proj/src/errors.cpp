#include "geoxplain/errors.hpp"

namespace geoxplain {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::NonRGBInput: return "NonRGBInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::CapabilityMissing: return "CapabilityMissing";
    case ErrorCode::InvalidPercentile: return "InvalidPercentile";
    case ErrorCode::NonFiniteValues: return "NonFiniteValues";
    case ErrorCode::ConceptsUnsupported: return "ConceptsUnsupported";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::BoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::BoxLargerThanImage: return "BoxLargerThanImage";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FatalBackendError: return "FatalBackendError";
    case ErrorCode::MissingArtifacts: return "MissingArtifacts";
    case ErrorCode::MissingResults: return "MissingResults";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
  }
  return "UnknownError";
}

}  // namespace geoxplain

#pragma once

#include <stdexcept>
#include <string>

namespace geoxplain {

enum class ErrorCode {
  MissingFile,
  SchemaError,
  LabelOutOfRange,
  DecodeError,
  NonRGBInput,
  ShapeMismatch,
  BackendFailure,
  EmptySplit,
  DivergenceDetected,
  CapabilityMissing,
  InvalidPercentile,
  NonFiniteValues,
  ConceptsUnsupported,
  EmptyMask,
  DimensionMismatch,
  UnsortedInput,
  BoxOutOfBounds,
  BoxLargerThanImage,
  EmptyResults,
  ConfigError,
  FatalBackendError,
  MissingArtifacts,
  MissingResults,
  GridTooLarge,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geoxplain

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lampdet {

enum class ErrorCode {
  InvalidRotation,
  BehindCamera,
  InvalidNormal,
  NonFiniteResidual,
  MissingFile,
  SchemaError,
  NonCoplanarSurface,
  NoCeilingAvailable,
  DegenerateBlob,
  TooFewVertices,
  EllipseFitFailure,
  DegenerateConfiguration,
  NoValidPose,
  ShapeModelMismatch,
  RaysParallelToPlane,
  EstimationFailed,
  NoVisibleTemplate,
  RayParallelToPlane,
  ProjectedAtCenter,
  TooManyDegeneratePoints,
  StateUndetermined,
  InvalidPath,
  IngestError,
  ValidationError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported with this exception type; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lampdet

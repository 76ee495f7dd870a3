#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rigrecon {

enum class ErrorCode {
  // geometry
  NonPositiveDepth,
  NonPositiveScale,
  NearPiRotation,
  InvalidIntrinsics,
  // pointmaps and graph
  EmptyEstimates,
  DimensionMismatch,
  GraphDisconnected,
  UnknownView,
  InvalidArgument,
  // losses
  InvalidMatchedPixel,
  InsufficientPoses,
  PoseIndexMismatch,
  // optimizer / solvers
  NonFiniteLoss,
  DegenerateMotion,
  ZeroCameraTranslation,
  // ground plane
  InsufficientPoints,
  NoConsensus,
  EmptyInput,
  // evaluation
  LengthMismatch,
  NoDetections,
  EmptyCloud,
  // synthetic scenes
  InvalidConfig,
  UnknownPreset,
  // files
  MissingChannel,
  CorruptBinary,
  MalformedLine,
  NonRigidRotation,
  FirstPoseNotIdentity,
  IoFailure,
};

/// Name of the error class, e.g. "NonPositiveDepth".
std::string_view error_name(ErrorCode code) noexcept;

/// True for failures of the numerics (as opposed to invalid inputs). The CLI
/// maps these to exit code 2.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what_arg)
      : std::runtime_error(std::string(error_name(code)) + ": " + what_arg), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rigrecon

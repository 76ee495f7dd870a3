#include "rigrecon/error.hpp"

namespace rigrecon {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::NearPiRotation: return "NearPiRotation";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::EmptyEstimates: return "EmptyEstimates";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GraphDisconnected: return "GraphDisconnected";
    case ErrorCode::UnknownView: return "UnknownView";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidMatchedPixel: return "InvalidMatchedPixel";
    case ErrorCode::InsufficientPoses: return "InsufficientPoses";
    case ErrorCode::PoseIndexMismatch: return "PoseIndexMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateMotion: return "DegenerateMotion";
    case ErrorCode::ZeroCameraTranslation: return "ZeroCameraTranslation";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoDetections: return "NoDetections";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::CorruptBinary: return "CorruptBinary";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonRigidRotation: return "NonRigidRotation";
    case ErrorCode::FirstPoseNotIdentity: return "FirstPoseNotIdentity";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateMotion:
    case ErrorCode::ZeroCameraTranslation:
    case ErrorCode::NearPiRotation:
    case ErrorCode::NoConsensus:
    case ErrorCode::GraphDisconnected:
      return true;
    default:
      return false;
  }
}

}  // namespace rigrecon

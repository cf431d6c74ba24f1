#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bleaoa {

enum class ErrorCode {
  MalformedJson,
  MissingField,
  OutOfRange,
  OverlappingChunks,
  ConflictingMetadata,
  NonOrthonormalRotation,
  DegeneratePosition,
  IncompletePacket,
  InvalidLayout,
  ZeroMagnitudeSample,
  InsufficientRounds,
  RankDeficient,
  UnpairedEstimate,
  LengthMismatch,
  Empty,
  EmptySubset,
  SingularAngle,
  DegenerateFit,
  SingularKernel,
  IncompleteFeature,
  Io,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// Typed exception used across the library; `code()` identifies the failure
/// class, the message carries context (field name, byte position, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bleaoa

#include "bleaoa/error.hpp"

namespace bleaoa {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::OverlappingChunks: return "OverlappingChunks";
    case ErrorCode::ConflictingMetadata: return "ConflictingMetadata";
    case ErrorCode::NonOrthonormalRotation: return "NonOrthonormalRotation";
    case ErrorCode::DegeneratePosition: return "DegeneratePosition";
    case ErrorCode::IncompletePacket: return "IncompletePacket";
    case ErrorCode::InvalidLayout: return "InvalidLayout";
    case ErrorCode::ZeroMagnitudeSample: return "ZeroMagnitudeSample";
    case ErrorCode::InsufficientRounds: return "InsufficientRounds";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::UnpairedEstimate: return "UnpairedEstimate";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::SingularAngle: return "SingularAngle";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::SingularKernel: return "SingularKernel";
    case ErrorCode::IncompleteFeature: return "IncompleteFeature";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace bleaoa

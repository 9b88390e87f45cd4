#include "wgp/error.hpp"

namespace wgp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::DuplicateRow: return "DuplicateRow";
    case ErrorCode::NonpositiveCapacity: return "NonpositiveCapacity";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::EmptyTrainingSlice: return "EmptyTrainingSlice";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::AllStartsFailed: return "AllStartsFailed";
    case ErrorCode::DuplicateTarget: return "DuplicateTarget";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonpositiveSigma: return "NonpositiveSigma";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownZone: return "UnknownZone";
    case ErrorCode::UnknownDay: return "UnknownDay";
    case ErrorCode::UnknownSite: return "UnknownSite";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace wgp

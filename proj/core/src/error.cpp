#include "mtraffic/error.hpp"

namespace mtraffic {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::LoopEdge: return "LoopEdge";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::NotStronglyConnected: return "NotStronglyConnected";
    case ErrorCode::EmptyBoundary: return "EmptyBoundary";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::IsolatedVertex: return "IsolatedVertex";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotInSubspace: return "NotInSubspace";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Unbalanced: return "Unbalanced";
    case ErrorCode::DegenerateGraph: return "DegenerateGraph";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::MarginalMismatch: return "MarginalMismatch";
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::GraphMismatch: return "GraphMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateNormalization: return "DegenerateNormalization";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::NoUsablePoints: return "NoUsablePoints";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateNormalization:
    case ErrorCode::Overflow:
    case ErrorCode::MarginalMismatch:
      return false;
    default:
      return true;
  }
}

}  // namespace mtraffic

#include "fragbn/error.hpp"

namespace fragbn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::InvalidStateSpace: return "InvalidStateSpace";
    case ErrorCode::UnresolvedVariable: return "UnresolvedVariable";
    case ErrorCode::CyclicFragmentGraph: return "CyclicFragmentGraph";
    case ErrorCode::InputNotRoot: return "InputNotRoot";
    case ErrorCode::ResidentInputOverlap: return "ResidentInputOverlap";
    case ErrorCode::UndeclaredNode: return "UndeclaredNode";
    case ErrorCode::EmptyResidents: return "EmptyResidents";
    case ErrorCode::BadHypothesisSubset: return "BadHypothesisSubset";
    case ErrorCode::InvalidPayload: return "InvalidPayload";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::UnknownSchema: return "UnknownSchema";
    case ErrorCode::IncompleteBinding: return "IncompleteBinding";
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::CyclicUnion: return "CyclicUnion";
    case ErrorCode::EnablingViolation: return "EnablingViolation";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::InconsistentSet: return "InconsistentSet";
    case ErrorCode::CoverageGap: return "CoverageGap";
    case ErrorCode::MissingPrior: return "MissingPrior";
    case ErrorCode::NAViolation: return "NAViolation";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::ZeroEvidence: return "ZeroEvidence";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace fragbn

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fragbn {

enum class ErrorCode {
  // knowledge base registration
  DuplicateName,
  InvalidDistribution,
  InvalidStateSpace,
  UnresolvedVariable,
  CyclicFragmentGraph,
  InputNotRoot,
  ResidentInputOverlap,
  UndeclaredNode,
  EmptyResidents,
  BadHypothesisSubset,
  InvalidPayload,
  ArityMismatch,
  UnknownAttribute,
  // workspace
  UnknownSchema,
  IncompleteBinding,
  InvalidInstance,
  UnknownVariable,
  InvalidState,
  // combination
  CyclicUnion,
  EnablingViolation,
  ZeroColumn,
  InconsistentSet,
  CoverageGap,
  MissingPrior,
  NAViolation,
  InvalidPartition,
  // inference
  UnknownNode,
  InvalidQuery,
  ZeroEvidence,
  TooLarge,
  // text formats
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base of every exception thrown by the library. The code is stable and
/// suitable for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fragbn

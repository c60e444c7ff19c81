#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esrs {

enum class ErrorCode {
  cycle_detected,
  unknown_item,
  duplicate_item,
  empty_domain,
  invalid_state,
  not_in_fringe,
  component_too_large,
  overflow,
  budget_exceeded,
  zero_evidence,
  empty_distribution,
  not_normalized,
  out_of_range,
  weights_not_normalized,
  no_neighbors,
  zero_preference_vector,
  unknown_archetype,
  missing_pair_entry,
  parse_error,
  dangling_reference,
  non_monotone_timestamps,
  session_not_found,
  invalid_argument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::cycle_detected: return "CycleDetected";
    case ErrorCode::unknown_item: return "UnknownItem";
    case ErrorCode::duplicate_item: return "DuplicateItem";
    case ErrorCode::empty_domain: return "EmptyDomain";
    case ErrorCode::invalid_state: return "InvalidState";
    case ErrorCode::not_in_fringe: return "NotInFringe";
    case ErrorCode::component_too_large: return "ComponentTooLarge";
    case ErrorCode::overflow: return "Overflow";
    case ErrorCode::budget_exceeded: return "BudgetExceeded";
    case ErrorCode::zero_evidence: return "ZeroEvidence";
    case ErrorCode::empty_distribution: return "EmptyDistribution";
    case ErrorCode::not_normalized: return "NotNormalized";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::weights_not_normalized: return "WeightsNotNormalized";
    case ErrorCode::no_neighbors: return "NoNeighbors";
    case ErrorCode::zero_preference_vector: return "ZeroPreferenceVector";
    case ErrorCode::unknown_archetype: return "UnknownArchetype";
    case ErrorCode::missing_pair_entry: return "MissingPairEntry";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::dangling_reference: return "DanglingReference";
    case ErrorCode::non_monotone_timestamps: return "NonMonotoneTimestamps";
    case ErrorCode::session_not_found: return "SessionNotFound";
    case ErrorCode::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace esrs

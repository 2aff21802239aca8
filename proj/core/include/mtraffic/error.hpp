#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtraffic {

enum class ErrorCode {
  InvalidInput,
  LoopEdge,
  DuplicateEdge,
  NotStronglyConnected,
  EmptyBoundary,
  Overflow,
  IsolatedVertex,
  NotSymmetric,
  NotInSubspace,
  NoConvergence,
  Unbalanced,
  DegenerateGraph,
  InvalidKernel,
  MarginalMismatch,
  ZeroMarginal,
  GraphMismatch,
  SizeMismatch,
  StateSpaceTooLarge,
  OutOfSupport,
  EmptyCorpus,
  DegenerateNormalization,
  MalformedXml,
  EmptyResult,
  NoUsablePoints,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Errors that carry a machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for codes caused by bad user input rather than a numerical failure.
bool is_input_error(ErrorCode code) noexcept;

}  // namespace mtraffic

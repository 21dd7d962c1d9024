#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psylex {

enum class ErrorCode {
  // input errors
  EmptyTermSet,
  BadHeader,
  DimsMismatch,
  CountMismatch,
  NonFiniteValue,
  RaggedRow,
  MissingValue,
  DoubleIpsatize,
  NoOverlap,
  TermMismatch,
  UnknownTerm,
  InvalidArgument,
  MissingInput,
  Io,
  // numerical errors
  DegenerateTerm,
  NotPositiveSemidefinite,
  EigenFailure,
  ZeroCommunality,
  NearZeroEigenvalue,
  ZeroVector,
};

std::string_view to_string(ErrorCode code);

/// True for codes that indicate a numerical failure rather than bad input.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace psylex

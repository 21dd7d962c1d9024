#include "psylex/error.hpp"

namespace psylex {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyTermSet: return "EmptyTermSet";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::DoubleIpsatize: return "DoubleIpsatize";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::TermMismatch: return "TermMismatch";
    case ErrorCode::UnknownTerm: return "UnknownTerm";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateTerm: return "DegenerateTerm";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::ZeroCommunality: return "ZeroCommunality";
    case ErrorCode::NearZeroEigenvalue: return "NearZeroEigenvalue";
    case ErrorCode::ZeroVector: return "ZeroVector";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateTerm:
    case ErrorCode::NotPositiveSemidefinite:
    case ErrorCode::EigenFailure:
    case ErrorCode::ZeroCommunality:
    case ErrorCode::NearZeroEigenvalue:
    case ErrorCode::ZeroVector:
      return true;
    default:
      return false;
  }
}

}  // namespace psylex

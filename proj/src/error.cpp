#include "cofcot/error.hpp"

namespace cofcot {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedBrackets: return "MalformedBrackets";
    case ErrorKind::MissingIntent: return "MissingIntent";
    case ErrorKind::NestedForm: return "NestedForm";
    case ErrorKind::EmptySlot: return "EmptySlot";
    case ErrorKind::UnbalancedParens: return "UnbalancedParens";
    case ErrorKind::DuplicateVariableDefinition: return "DuplicateVariableDefinition";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::MalformedNode: return "MalformedNode";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::UnparseableGoldForm: return "UnparseableGoldForm";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DomainNotFound: return "DomainNotFound";
    case ErrorKind::InsufficientAnnotatedData: return "InsufficientAnnotatedData";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidPlan: return "InvalidPlan";
    case ErrorKind::InvalidAblation: return "InvalidAblation";
    case ErrorKind::NoExtractableAnswer: return "NoExtractableAnswer";
    case ErrorKind::UnparseableFinalForm: return "UnparseableFinalForm";
    case ErrorKind::MissingAnnotations: return "MissingAnnotations";
    case ErrorKind::TemplateError: return "TemplateError";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::AuthFailure: return "AuthFailure";
    case ErrorKind::ReplayMiss: return "ReplayMiss";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::WriteFailure: return "WriteFailure";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ErrorKind error_kind_from_string(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::InvalidConfig); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == name) return static_cast<ErrorKind>(k);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown error kind '" + std::string(name) + "'");
}

}  // namespace cofcot

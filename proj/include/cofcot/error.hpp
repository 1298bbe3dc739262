#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cofcot {

// Every failure raised by the library carries one of these kinds so callers
// (and tests) can branch on the category without string matching.
enum class ErrorKind {
  // logicform
  MalformedBrackets,
  MissingIntent,
  NestedForm,
  EmptySlot,
  // amr
  UnbalancedParens,
  DuplicateVariableDefinition,
  DanglingReference,
  EmptyGraph,
  MalformedNode,
  // metrics
  LengthMismatch,
  EmptyInput,
  // dataset
  UnreadableFile,
  MalformedRecord,
  UnparseableGoldForm,
  InsufficientData,
  DomainNotFound,
  InsufficientAnnotatedData,
  InvalidArgument,
  // pipeline / strategies
  InvalidPlan,
  InvalidAblation,
  NoExtractableAnswer,
  UnparseableFinalForm,
  MissingAnnotations,
  TemplateError,
  // backend
  RateLimited,
  AuthFailure,
  ReplayMiss,
  MalformedResponse,
  BackendError,
  WriteFailure,
  // cli
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);
// Inverse of to_string; throws InvalidArgument for an unknown name.
ErrorKind error_kind_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cofcot

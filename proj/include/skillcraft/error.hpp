#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skillcraft {

enum class ErrorKind {
  // skill_store
  SchemaViolation,
  BudgetExceeded,
  DuplicateName,
  NotFound,
  StoreSealed,
  // experience_pool
  EmptyInput,
  InsufficientTrajectories,
  // model_gateway
  AuthError,
  RateLimited,
  Transport,
  MalformedResponse,
  Exhausted,
  ScriptExhausted,
  // extraction_engine
  MalformedModelOutput,
  SynthesisStalled,
  FormatRewriteFailed,
  // utility_metrics
  MissingBaseline,
  MissingSkillRuns,
  UnknownExtractor,
  UnknownTarget,
  IncompleteDesign,
  ZeroNoise,
  // judgment_rubric
  AllVotesUnparseable,
  // injection / cli
  ModeMismatch,
  InvalidArgument,
  Parse,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Error(ErrorKind kind, const std::string& message, std::string detail)
      : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Extra payload, e.g. the raw model text behind a MalformedModelOutput.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace skillcraft

#include "skillcraft/error.hpp"

namespace skillcraft {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::StoreSealed: return "StoreSealed";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InsufficientTrajectories: return "InsufficientTrajectories";
    case ErrorKind::AuthError: return "AuthError";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::Exhausted: return "Exhausted";
    case ErrorKind::ScriptExhausted: return "ScriptExhausted";
    case ErrorKind::MalformedModelOutput: return "MalformedModelOutput";
    case ErrorKind::SynthesisStalled: return "SynthesisStalled";
    case ErrorKind::FormatRewriteFailed: return "FormatRewriteFailed";
    case ErrorKind::MissingBaseline: return "MissingBaseline";
    case ErrorKind::MissingSkillRuns: return "MissingSkillRuns";
    case ErrorKind::UnknownExtractor: return "UnknownExtractor";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
    case ErrorKind::IncompleteDesign: return "IncompleteDesign";
    case ErrorKind::ZeroNoise: return "ZeroNoise";
    case ErrorKind::AllVotesUnparseable: return "AllVotesUnparseable";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace skillcraft

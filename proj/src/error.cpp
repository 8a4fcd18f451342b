#include "spft/error.hpp"

namespace spft {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
    case Errc::UnresolvedFk: return "UnresolvedFk";
    case Errc::UnknownTable: return "UnknownTable";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::RuntimeError: return "RuntimeError";
    case Errc::Timeout: return "Timeout";
    case Errc::WriteRejected: return "WriteRejected";
    case Errc::GoldExecFailed: return "GoldExecFailed";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ParseError: return "ParseError";
    case Errc::UnresolvedColumn: return "UnresolvedColumn";
    case Errc::UnsupportedStatement: return "UnsupportedStatement";
    case Errc::AllItemsFailed: return "AllItemsFailed";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::NoCompatibleColumn: return "NoCompatibleColumn";
    case Errc::ExhaustedCandidates: return "ExhaustedCandidates";
    case Errc::NoValuesAvailable: return "NoValuesAvailable";
    case Errc::DisconnectedTables: return "DisconnectedTables";
    case Errc::InstantiationFailed: return "InstantiationFailed";
    case Errc::SynthesisStalled: return "SynthesisStalled";
    case Errc::UnknownQuestion: return "UnknownQuestion";
    case Errc::UnknownCandidate: return "UnknownCandidate";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace spft

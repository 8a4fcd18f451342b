#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spft {

enum class Errc {
  // schema
  IoError,
  FormatError,
  UnresolvedFk,
  UnknownTable,
  // executor
  SyntaxError,
  RuntimeError,
  Timeout,
  WriteRejected,
  GoldExecFailed,
  EmptyInput,
  // template
  ParseError,
  UnresolvedColumn,
  UnsupportedStatement,
  AllItemsFailed,
  EmptyPool,
  // synthesizer
  NoCompatibleColumn,
  ExhaustedCandidates,
  NoValuesAvailable,
  DisconnectedTables,
  InstantiationFailed,
  SynthesisStalled,
  // policy
  UnknownQuestion,
  UnknownCandidate,
  // general
  InvalidArgument,
  InvariantViolation,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (tests, the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spft

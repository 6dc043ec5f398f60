#pragma once

#include <stdexcept>
#include <string>

namespace echoaudit {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kInvariantViolation = 2,
  kInternalError = 3,
};

class AuditError : public std::runtime_error {
 public:
  AuditError(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Unreadable, missing or malformed input.
class InputError : public AuditError {
 public:
  explicit InputError(const std::string& what)
      : AuditError(ExitCode::kInputError, what) {}
};

// Input is readable but breaks a data-model invariant (e.g. corrupt labeling).
class InvariantViolation : public AuditError {
 public:
  explicit InvariantViolation(const std::string& what)
      : AuditError(ExitCode::kInvariantViolation, what) {}
};

// A pipeline stage failed; carries the stage name and the underlying code.
class StageError : public AuditError {
 public:
  StageError(std::string stage, ExitCode code, const std::string& what)
      : AuditError(code, "stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace echoaudit

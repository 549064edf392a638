#pragma once

#include <stdexcept>
#include <string>

namespace fracwave {

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind {
  config,     // invalid user input or parameter domain violation
  numerical,  // solver failure (divergence, stagnation, ...)
  blowup,     // evolution stopped at the blow-up ceiling; partial results exist
  io,         // file missing, unreadable or malformed
};

/// Exception carrying a kind and a short machine-readable code such as
/// "diverged" or "outside tube".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), kind_(kind), code_(std::move(code)), detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string code_;
  std::string detail_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 2;
    case ErrorKind::numerical: return 3;
    case ErrorKind::blowup: return 4;
  }
  return 1;
}

}  // namespace fracwave
